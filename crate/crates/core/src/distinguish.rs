//! Concrete distinguishers and Monte Carlo advantage estimation.
//!
//! Advantage is reported with the sign convention
//! `P(guess = perm | perm) - P(guess = perm | func)`. Each trial draws an
//! independent reply sequence per world from stream `trial_stream(world, t)`
//! of the run seed; per-world hit counts are summed, so the estimate is the
//! same for any thread count. Confidence intervals use the normal
//! approximation with `z = 2.5758` (two-sided 99%), adequate at the trial
//! counts used here (10^4 and up).

use std::sync::OnceLock;

use rayon::prelude::*;
use rug::{Integer, Rational};

use crate::error::{Error, Result};
use crate::exact::ProbabilityTables;
use crate::oracle::{sample_with_rng, stream_rng, trial_stream, Params, ReplySequence, World};
use crate::profile::{col_j, expected_col, profile_of_slice, MultiplicityProfile};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.5758;

/// Parameters of the good set
/// `S = { |col_j - E_f col_j| <= dev_j for 2 <= j <= t, col_(t+1) <= beta }`.
///
/// Deviations are indexed by the collision order they bound: `dev()[0]`
/// bounds `col_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SParams {
    t: u32,
    dev: Vec<f64>,
    beta: f64,
}

impl SParams {
    pub fn new(t: u32, dev: Vec<f64>, beta: f64) -> Result<Self> {
        if t < 2 {
            return Err(Error::Invalid(format!("t = {t} must be at least 2")));
        }
        if dev.len() != (t - 1) as usize {
            return Err(Error::Invalid(format!(
                "expected {} deviation thresholds for t = {t}, got {}",
                t - 1,
                dev.len()
            )));
        }
        if dev.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::Invalid(
                "deviation thresholds must be finite and positive".into(),
            ));
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::Invalid(
                "beta must be finite and non-negative".into(),
            ));
        }
        Ok(Self { t, dev, beta })
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn dev(&self) -> &[f64] {
        &self.dev
    }

    /// Threshold on `|col_j - E_f col_j|`, for `2 <= j <= t`.
    pub fn dev_for(&self, j: u32) -> f64 {
        self.dev[(j - 2) as usize]
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Exact membership test specialised to one instance.
    pub fn membership(&self, params: &Params) -> Membership {
        Membership {
            t: self.t,
            means: (2..=self.t).map(|j| expected_col(params, j)).collect(),
            dev: self
                .dev
                .iter()
                .map(|&d| Rational::from_f64(d).expect("finite"))
                .collect(),
            beta: Rational::from_f64(self.beta).expect("finite"),
        }
    }
}

/// Precomputed exact thresholds for `S` on one instance.
#[derive(Debug, Clone)]
pub struct Membership {
    t: u32,
    means: Vec<Rational>,
    dev: Vec<Rational>,
    beta: Rational,
}

impl Membership {
    pub fn contains(&self, profile: &MultiplicityProfile) -> bool {
        if col_j(profile, self.t + 1) > self.beta {
            return false;
        }
        for (k, (mean, dev)) in self.means.iter().zip(&self.dev).enumerate() {
            let col = Rational::from(col_j(profile, k as u32 + 2));
            if (col - mean).abs() > *dev {
                return false;
            }
        }
        true
    }
}

/// Hall-style good set: `t = 2`, `dev_2 = c q / 2^((n-m+1)/2)`, `beta = 0`.
pub fn hall_s_params(params: &Params, c: f64) -> Result<SParams> {
    if !c.is_finite() || c <= 0.0 {
        return Err(Error::Invalid(format!("c = {c} must be positive")));
    }
    let exponent = (params.reply_bits() as f64 + 1.0) / 2.0;
    SParams::new(2, vec![c * params.q() as f64 / exponent.exp2()], 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distinguisher {
    /// Guess permutation iff `P_p / P_f >= 1` (ties go to permutation).
    LikelihoodRatio,
    /// Guess function iff `col_2 >= theta`.
    Col2Threshold { theta: f64 },
    /// Guess permutation iff the replies lie in `S`.
    SMembership(SParams),
    /// Always the same guess; advantage zero.
    Constant(World),
}

impl Distinguisher {
    pub fn label(&self) -> String {
        match self {
            Distinguisher::LikelihoodRatio => "likelihood-ratio".into(),
            Distinguisher::Col2Threshold { theta } => format!("col2-threshold({theta})"),
            Distinguisher::SMembership(s) => {
                let devs: Vec<String> = s.dev().iter().map(|d| d.to_string()).collect();
                format!(
                    "s-membership(t={};dev={};beta={})",
                    s.t(),
                    devs.join(":"),
                    s.beta()
                )
            }
            Distinguisher::Constant(w) => format!("constant({w})"),
        }
    }

    /// Precompute whatever the rule needs for repeated decisions on `params`.
    pub fn compile(&self, params: &Params) -> Decider {
        let rule = match self {
            Distinguisher::LikelihoodRatio => Rule::LikelihoodRatio(LrTables::new(params)),
            Distinguisher::Col2Threshold { theta } => Rule::Col2(*theta),
            Distinguisher::SMembership(s) => Rule::Membership(s.membership(params)),
            Distinguisher::Constant(w) => Rule::Constant(*w),
        };
        Decider {
            params: *params,
            rule,
        }
    }
}

/// Log-ratio tables: `ln(P_p/P_f) = sum_k g[d_k] - c` with
/// `g[d] = sum_{i<d} ln(1 - i/2^m)` and `c = sum_{i<q} ln(1 - i/2^n)`.
#[derive(Debug)]
struct LrTables {
    bucket: Vec<f64>,
    domain_term: f64,
    exact: OnceLock<ProbabilityTables>,
}

/// Log ratios closer to zero than this are settled in exact arithmetic.
const LR_TIE_MARGIN: f64 = 1e-9;

impl LrTables {
    fn new(params: &Params) -> Self {
        let cap = params.bucket_capacity();
        let max_d = params.q().min(cap);
        let mut bucket = Vec::with_capacity(max_d as usize + 1);
        let mut acc = 0.0f64;
        bucket.push(0.0);
        for i in 0..max_d {
            acc += (-(i as f64) / cap as f64).ln_1p();
            bucket.push(acc);
        }
        let domain = params.domain_size() as f64;
        let domain_term = (0..params.q())
            .map(|i| (-(i as f64) / domain).ln_1p())
            .sum();
        Self {
            bucket,
            domain_term,
            exact: OnceLock::new(),
        }
    }

    fn favours_permutation(&self, params: &Params, profile: &MultiplicityProfile) -> bool {
        let mut ln_ratio = -self.domain_term;
        for &d in profile.parts() {
            match self.bucket.get(d as usize) {
                Some(g) => ln_ratio += g,
                None => return false,
            }
        }
        if ln_ratio.abs() > LR_TIE_MARGIN {
            return ln_ratio > 0.0;
        }
        let tables = self.exact.get_or_init(|| ProbabilityTables::new(params));
        let num = tables.perm_numerator(profile);
        (num * &tables.func_den) >= tables.perm_den
    }
}

impl Clone for LrTables {
    fn clone(&self) -> Self {
        Self {
            bucket: self.bucket.clone(),
            domain_term: self.domain_term,
            exact: OnceLock::new(),
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    LikelihoodRatio(LrTables),
    Col2(f64),
    Membership(Membership),
    Constant(World),
}

/// A distinguisher compiled for one instance.
#[derive(Debug, Clone)]
pub struct Decider {
    params: Params,
    rule: Rule,
}

impl Decider {
    pub fn decide(&self, omega: &ReplySequence) -> World {
        self.decide_replies(omega.replies())
    }

    fn decide_replies(&self, replies: &[u64]) -> World {
        let guess_perm = match &self.rule {
            Rule::Constant(w) => return *w,
            Rule::LikelihoodRatio(lr) => {
                lr.favours_permutation(&self.params, &self.profile(replies))
            }
            Rule::Col2(theta) => {
                let col2: u128 = self
                    .profile(replies)
                    .parts()
                    .iter()
                    .map(|&d| d as u128 * (d as u128 - 1) / 2)
                    .sum();
                Integer::from(col2) < *theta
            }
            Rule::Membership(s) => s.contains(&self.profile(replies)),
        };
        if guess_perm {
            World::Permutation
        } else {
            World::Function
        }
    }

    fn profile(&self, replies: &[u64]) -> MultiplicityProfile {
        let a = self.params.alphabet_size();
        if a <= 4 * replies.len() as u64 {
            let mut counts = vec![0u64; a as usize];
            for &r in replies {
                counts[r as usize] += 1;
            }
            let mut parts: Vec<u64> = counts.into_iter().filter(|&c| c > 0).collect();
            parts.sort_unstable_by(|x, y| y.cmp(x));
            MultiplicityProfile::from_sorted(parts)
        } else {
            profile_of_slice(replies)
        }
    }
}

/// One-off decision; compile once instead when deciding repeatedly.
pub fn decide(d: &Distinguisher, omega: &ReplySequence, params: &Params) -> World {
    d.compile(params).decide(omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdvEstimate {
    /// `P(guess=perm | perm) - P(guess=perm | func)`, unclamped.
    pub point: f64,
    /// `z * sqrt(v_perm + v_func)` with per-world binomial variances.
    pub ci_half_width: f64,
    pub trials_per_world: u64,
    pub seed: u64,
    /// Trials guessing permutation in the permutation world.
    pub perm_hits: u64,
    /// Trials guessing permutation in the function world.
    pub func_hits: u64,
}

impl AdvEstimate {
    fn from_counts(perm_hits: u64, func_hits: u64, trials: u64, seed: u64) -> Self {
        let n = trials as f64;
        let p1 = perm_hits as f64 / n;
        let p0 = func_hits as f64 / n;
        let var = p1 * (1.0 - p1) / n + p0 * (1.0 - p0) / n;
        Self {
            point: p1 - p0,
            ci_half_width: Z_99 * var.sqrt(),
            trials_per_world: trials,
            seed,
            perm_hits,
            func_hits,
        }
    }

    pub fn lower(&self) -> f64 {
        self.point - self.ci_half_width
    }

    pub fn upper(&self) -> f64 {
        self.point + self.ci_half_width
    }

    pub fn covers(&self, value: f64) -> bool {
        (value - self.point).abs() <= self.ci_half_width
    }
}

/// Monte Carlo estimate over `trials` sessions per world.
pub fn mc_advantage(
    d: &Distinguisher,
    params: &Params,
    trials: u64,
    seed: u64,
) -> Result<AdvEstimate> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be at least 1".into()));
    }
    let decider = d.compile(params);
    let (perm_hits, func_hits) = (0..trials)
        .into_par_iter()
        .map(|t| {
            let hit = |world: World| {
                let rng = stream_rng(seed, trial_stream(world, t));
                let omega = sample_with_rng(params, world, rng);
                (decider.decide_replies(omega.replies()) == World::Permutation) as u64
            };
            (hit(World::Permutation), hit(World::Function))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(AdvEstimate::from_counts(perm_hits, func_hits, trials, seed))
}

#[derive(Debug, Clone, PartialEq)]
pub enum QHalfEstimate {
    /// Smallest `q` found whose lower confidence edge reaches one half.
    Reached {
        q: u64,
        estimate: AdvEstimate,
        evaluations: u32,
    },
    NotReached {
        max_q: u64,
        evaluations: u32,
    },
}

impl QHalfEstimate {
    pub fn q(&self) -> Option<u64> {
        match self {
            QHalfEstimate::Reached { q, .. } => Some(*q),
            QHalfEstimate::NotReached { .. } => None,
        }
    }
}

/// Empirical `q_1/2` by doubling then bisecting on `q`, using the
/// conservative criterion `point - ci_half_width >= 1/2`.
pub fn empirical_q_half<F>(
    family: F,
    n: u32,
    m: u32,
    max_q: u64,
    trials: u64,
    seed: u64,
) -> Result<QHalfEstimate>
where
    F: Fn(&Params) -> Distinguisher + Sync,
{
    let probe = Params::new(n, m, max_q)?;
    let mut evaluations = 0u32;
    let mut reaches = |q: u64| -> Result<Option<AdvEstimate>> {
        evaluations += 1;
        let params = probe.with_q(q)?;
        let est = mc_advantage(&family(&params), &params, trials, seed)?;
        Ok((est.lower() >= 0.5).then_some(est))
    };

    let mut below = 0u64;
    let mut q = 1u64;
    let (mut hi, mut hi_est) = loop {
        if let Some(est) = reaches(q)? {
            break (q, est);
        }
        if q >= max_q {
            return Ok(QHalfEstimate::NotReached { max_q, evaluations });
        }
        below = q;
        q = (q * 2).min(max_q);
    };
    while hi - below > 1 {
        let mid = below + (hi - below) / 2;
        match reaches(mid)? {
            Some(est) => {
                hi = mid;
                hi_est = est;
            }
            None => below = mid,
        }
    }
    Ok(QHalfEstimate::Reached {
        q: hi,
        estimate: hi_est,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, m: u32, q: u64) -> Params {
        Params::new(n, m, q).unwrap()
    }

    fn seq(params: &Params, v: &[u64]) -> ReplySequence {
        ReplySequence::new(params, v.to_vec()).unwrap()
    }

    #[test]
    fn sparams_validation() {
        assert!(SParams::new(1, vec![], 0.0).is_err());
        assert!(SParams::new(2, vec![], 0.0).is_err());
        assert!(SParams::new(2, vec![0.0], 0.0).is_err());
        assert!(SParams::new(2, vec![1.0], -1.0).is_err());
        assert!(SParams::new(2, vec![f64::INFINITY], 1.0).is_err());
        let s = SParams::new(3, vec![1.0, 2.0], 0.5).unwrap();
        assert_eq!(s.dev_for(3), 2.0);
    }

    #[test]
    fn hall_params() {
        let s = hall_s_params(&p(4, 1, 4), 1.0).unwrap();
        assert_eq!(s.t(), 2);
        assert_eq!(s.dev_for(2), 1.0);
        assert_eq!(s.beta(), 0.0);
        assert!(hall_s_params(&p(4, 1, 4), 0.0).is_err());
        assert!(hall_s_params(&p(4, 1, 4), -2.0).is_err());
    }

    #[test]
    fn hall_set_rejects_triples() {
        let params = p(4, 1, 4);
        let s = hall_s_params(&params, 100.0).unwrap();
        let d = Distinguisher::SMembership(s);
        assert_eq!(
            decide(&d, &seq(&params, &[5, 5, 5, 1]), &params),
            World::Function
        );
        assert_eq!(
            decide(&d, &seq(&params, &[5, 5, 2, 1]), &params),
            World::Permutation
        );
    }

    #[test]
    fn lr_examples() {
        let params = p(6, 2, 5);
        let d = Distinguisher::LikelihoodRatio;
        assert_eq!(
            decide(&d, &seq(&params, &[0, 1, 2, 3, 4]), &params),
            World::Permutation
        );
        // Five equal replies overflow a bucket of four.
        assert_eq!(
            decide(&d, &seq(&params, &[7, 7, 7, 7, 7]), &params),
            World::Function
        );
    }

    #[test]
    fn lr_matches_exact_ratio() {
        use crate::exact::world_probabilities;
        use crate::profile::Partitions;
        for params in [p(4, 2, 6), p(5, 1, 9), p(8, 3, 12), p(3, 0, 8)] {
            let d = Distinguisher::LikelihoodRatio.compile(&params);
            for profile in Partitions::new(
                params.q(),
                params.q().min(params.alphabet_size()),
                params.q(),
            ) {
                let mut replies = Vec::new();
                for (sym, &c) in profile.parts().iter().enumerate() {
                    replies.extend(std::iter::repeat_n(sym as u64, c as usize));
                }
                let ratio = world_probabilities(&profile, &params).unwrap().ratio;
                let expect = if ratio >= 1 {
                    World::Permutation
                } else {
                    World::Function
                };
                assert_eq!(
                    d.decide(&seq(&params, &replies)),
                    expect,
                    "{params} {profile}"
                );
            }
        }
    }

    #[test]
    fn lr_tie_goes_to_permutation() {
        // Every single-query sequence ties; scan for others as well.
        use crate::exact::world_probabilities;
        use crate::profile::Partitions;
        let mut found = false;
        for n in 2..=6u32 {
            for m in 0..n {
                for q in 1..=(1u64 << n).min(10) {
                    let params = p(n, m, q);
                    let d = Distinguisher::LikelihoodRatio.compile(&params);
                    for profile in Partitions::new(q, q.min(params.alphabet_size()), q) {
                        if world_probabilities(&profile, &params).unwrap().ratio == 1 {
                            found = true;
                            let mut replies = Vec::new();
                            for (sym, &c) in profile.parts().iter().enumerate() {
                                replies.extend(std::iter::repeat_n(sym as u64, c as usize));
                            }
                            assert_eq!(d.decide(&seq(&params, &replies)), World::Permutation);
                        }
                    }
                }
            }
        }
        assert!(
            found,
            "expected at least one exact tie in the scanned range"
        );
    }

    #[test]
    fn col2_threshold_example() {
        let params = p(2, 1, 2);
        let alpha = 0.25;
        let d = Distinguisher::Col2Threshold { theta: 0.5 + alpha };
        assert_eq!(decide(&d, &seq(&params, &[1, 1]), &params), World::Function);
        assert_eq!(
            decide(&d, &seq(&params, &[0, 1]), &params),
            World::Permutation
        );
    }

    #[test]
    fn constant_has_zero_advantage() {
        let est = mc_advantage(
            &Distinguisher::Constant(World::Permutation),
            &p(6, 2, 8),
            1000,
            3,
        )
        .unwrap();
        assert_eq!(est.point, 0.0);
        assert_eq!(est.ci_half_width, 0.0);
        assert!(est.covers(0.0));
    }

    #[test]
    fn mc_rejects_zero_trials() {
        assert!(mc_advantage(&Distinguisher::LikelihoodRatio, &p(4, 1, 3), 0, 1).is_err());
    }

    #[test]
    fn mc_small_instance_near_exact() {
        let est = mc_advantage(&Distinguisher::LikelihoodRatio, &p(2, 1, 2), 200_000, 11).unwrap();
        assert!(est.covers(1.0 / 6.0), "{est:?}");
    }

    #[test]
    fn q_half_not_reached_with_tiny_budget() {
        let r = empirical_q_half(|_| Distinguisher::LikelihoodRatio, 16, 8, 16, 2000, 1).unwrap();
        assert!(matches!(r, QHalfEstimate::NotReached { max_q: 16, .. }));
        assert_eq!(r.q(), None);
    }

    #[test]
    fn q_half_small_m0() {
        // n=8: exact collision test first reaches 1/2 at q = 20.
        let r = empirical_q_half(|_| Distinguisher::LikelihoodRatio, 8, 0, 256, 20_000, 5).unwrap();
        let q = r.q().unwrap();
        assert!((20..=26).contains(&q), "{r:?}");
    }
}
