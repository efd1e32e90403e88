//! Exact world probabilities and total-variation advantage.
//!
//! Everything here is computed in arbitrary-precision integers with a single
//! common denominator. For a profile `d_1..d_l` of `q` replies,
//!
//! ```text
//! P_p = prod_k (2^m)_(d_k) / (2^n)_q        P_f = 2^(-(n-m) q)
//! ```
//!
//! where `(x)_k` is the falling factorial. Writing `D = (2^n)_q` and
//! `F = 2^((n-m) q)`, the advantage is `sum count * |N F - D| / (2 D F)`.

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Complete, Integer, Rational};

use crate::distinguish::SParams;
use crate::error::{Error, Result};
use crate::oracle::Params;
use crate::profile::{
    profile_partitions, MultiplicityProfile, ProfileCounter, DEFAULT_PROFILE_LIMIT,
};

/// Largest `|Omega|` the brute-force oracle will walk.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Both worlds' probabilities of one sequence with a given profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldProbabilities {
    pub p_perm: Rational,
    pub p_func: Rational,
    /// `p_perm / p_func`.
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactAdvantageReport {
    pub advantage: Rational,
    pub profiles_enumerated: u64,
    /// `P_p(E)` for the likelihood-ratio region `E = {P_p >= P_f}`.
    pub ml_threshold_mass: Rational,
    /// `P_f(E)` for the same region.
    pub ml_threshold_func_mass: Rational,
}

/// Falling factorial `x (x-1) ... (x-k+1)`.
pub(crate) fn falling(x: u64, k: u64) -> Integer {
    let mut acc = Integer::from(1);
    let x = Integer::from(x);
    for i in 0..k {
        acc *= &x - Integer::from(i);
    }
    acc
}

/// Per-instance integer tables shared by every profile.
#[derive(Debug, Clone)]
pub(crate) struct ProbabilityTables {
    /// `(2^n)_q`.
    pub perm_den: Integer,
    /// `2^((n-m) q)`.
    pub func_den: Integer,
    /// `(2^m)_d` for `d <= min(q, 2^m)`.
    pub bucket_falling: Vec<Integer>,
}

impl ProbabilityTables {
    pub fn new(params: &Params) -> Self {
        let q = params.q();
        let cap = params.bucket_capacity();
        let max_d = q.min(cap);
        let mut bucket_falling = Vec::with_capacity(max_d as usize + 1);
        bucket_falling.push(Integer::from(1));
        let c = Integer::from(cap);
        for d in 1..=max_d {
            let next = &bucket_falling[d as usize - 1] * (&c - Integer::from(d - 1));
            bucket_falling.push(next);
        }
        let shift =
            u32::try_from(q * params.reply_bits() as u64).expect("2^((n-m)q) exponent fits in u32");
        Self {
            perm_den: falling(params.domain_size(), q),
            func_den: Integer::from(1) << shift,
            bucket_falling,
        }
    }

    /// Numerator of `P_p` over `perm_den`; zero if a part overflows a bucket.
    pub fn perm_numerator(&self, profile: &MultiplicityProfile) -> Integer {
        let mut acc = Integer::from(1);
        for &d in profile.parts() {
            match self.bucket_falling.get(d as usize) {
                Some(f) => acc *= f,
                None => return Integer::new(),
            }
        }
        acc
    }

    pub fn ratio(&self, numerator: &Integer) -> Rational {
        Rational::from((
            (numerator * &self.func_den).complete(),
            self.perm_den.clone(),
        ))
    }
}

pub fn world_probabilities(
    profile: &MultiplicityProfile,
    params: &Params,
) -> Result<WorldProbabilities> {
    if profile.total() != params.q() {
        return Err(Error::Invalid(format!(
            "profile {profile} sums to {}, expected q = {}",
            profile.total(),
            params.q()
        )));
    }
    let tables = ProbabilityTables::new(params);
    let num = tables.perm_numerator(profile);
    let ratio = tables.ratio(&num);
    Ok(WorldProbabilities {
        p_perm: Rational::from((num, tables.perm_den.clone())),
        p_func: Rational::from((1, tables.func_den.clone())),
        ratio,
    })
}

/// Exact additive partial sums; merge order does not matter.
#[derive(Debug, Default)]
struct Accumulator {
    profiles: u64,
    /// `sum count * |N F - D|` over bucket-feasible profiles.
    tv: Integer,
    /// `sum count` over bucket-feasible profiles.
    feasible_count: Integer,
    /// `sum count * N` over `N F >= D`.
    lr_perm: Integer,
    /// `sum count` over `N F >= D`.
    lr_func: Integer,
}

impl Accumulator {
    fn merge(mut self, other: Self) -> Self {
        self.profiles += other.profiles;
        self.tv += other.tv;
        self.feasible_count += other.feasible_count;
        self.lr_perm += other.lr_perm;
        self.lr_func += other.lr_func;
        self
    }
}

/// `max_x P(guess=perm | perm) - P(guess=perm | func)` over all decision
/// rules, i.e. the total-variation distance of the two reply distributions.
pub fn exact_advantage(params: &Params) -> Result<ExactAdvantageReport> {
    exact_advantage_limited(params, DEFAULT_PROFILE_LIMIT)
}

pub fn exact_advantage_limited(params: &Params, limit: u128) -> Result<ExactAdvantageReport> {
    // Profiles overflowing a bucket have P_p = 0 and contribute their P_f
    // mass; that mass is 1 minus the feasible P_f mass, so only the capped
    // support is enumerated.
    let partitions = profile_partitions(params, true, limit)?;
    let counter = ProfileCounter::new(params);
    let tables = ProbabilityTables::new(params);
    let acc = partitions
        .par_bridge()
        .fold(Accumulator::default, |mut acc, profile| {
            let count = counter.count(&profile);
            let num = tables.perm_numerator(&profile);
            let scaled = (&num * &tables.func_den).complete();
            let diff = (&scaled - &tables.perm_den).complete();
            if diff >= 0 {
                acc.lr_perm += (&count * &num).complete();
                acc.lr_func += &count;
            }
            acc.tv += &count * diff.abs();
            acc.feasible_count += &count;
            acc.profiles += 1;
            acc
        })
        .reduce(Accumulator::default, Accumulator::merge);

    let infeasible = (&tables.func_den - &acc.feasible_count).complete();
    let total = acc.tv + infeasible * &tables.perm_den;
    let den = (&tables.perm_den * &tables.func_den).complete() * 2u32;
    Ok(ExactAdvantageReport {
        advantage: Rational::from((total, den)),
        profiles_enumerated: acc.profiles,
        ml_threshold_mass: Rational::from((acc.lr_perm, tables.perm_den.clone())),
        ml_threshold_func_mass: Rational::from((acc.lr_func, tables.func_den.clone())),
    })
}

/// Exact advantage by walking every `omega` in `Omega` directly.
///
/// Shares no code with the profile path: the permutation probability is
/// the sequential product `prod_i (2^m - c_i) / (2^n - i)`, with `c_i` the
/// number of earlier replies equal to reply `i`.
pub fn brute_force_advantage(params: &Params) -> Result<Rational> {
    let omega_size = omega_size(params)?;
    let q = params.q() as usize;
    let a = params.alphabet_size();
    let cap = Integer::from(params.bucket_capacity());

    let mut perm_den = Integer::from(1);
    for i in 0..params.q() {
        perm_den *= Integer::from(params.domain_size() - i);
    }
    let func_den = Integer::from(a).pow(q as u32);

    let mut word = vec![0u64; q];
    let mut sum = Integer::new();
    let mut seen = std::collections::HashMap::new();
    for _ in 0..omega_size {
        seen.clear();
        let mut num = Integer::from(1);
        for &s in &word {
            let c = seen.entry(s).or_insert(0u64);
            let free = &cap - Integer::from(*c);
            *c += 1;
            if free <= 0 {
                num = Integer::new();
                break;
            }
            num *= free;
        }
        sum += (num * &func_den - &perm_den).abs();
        increment(&mut word, a);
    }
    let den = perm_den * func_den * 2u32;
    Ok(Rational::from((sum, den)))
}

pub(crate) fn omega_size(params: &Params) -> Result<u128> {
    let a = params.alphabet_size() as u128;
    let mut size: u128 = 1;
    for _ in 0..params.q() {
        size = size.saturating_mul(a);
        if size > BRUTE_FORCE_LIMIT {
            return Err(Error::Size {
                what: "|Omega|",
                estimate: size,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
    }
    Ok(size)
}

/// Mixed-radix increment with wrap-around.
pub(crate) fn increment(word: &mut [u64], radix: u64) {
    for digit in word.iter_mut().rev() {
        *digit += 1;
        if *digit < radix {
            return;
        }
        *digit = 0;
    }
}

/// Quantities of the good-set decomposition for one choice of `S`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetQuantities {
    /// `max_{omega in S} |P_p/P_f - 1|`; zero when `S` is empty.
    pub max_ratio_dev: Rational,
    /// `P_f(complement of S)`.
    pub pf_complement: Rational,
    /// `P_p(complement of S)`.
    pub pp_complement: Rational,
    /// Profiles (not sequences) found in `S`.
    pub profiles_in_s: u64,
    pub profiles_enumerated: u64,
}

impl SetQuantities {
    /// `max_ratio_dev + pf_complement`, an upper bound on the advantage.
    pub fn advantage_bound(&self) -> Rational {
        (&self.max_ratio_dev + &self.pf_complement).complete()
    }
}

pub fn set_quantities(params: &Params, s: &SParams) -> Result<SetQuantities> {
    set_quantities_limited(params, s, DEFAULT_PROFILE_LIMIT)
}

pub fn set_quantities_limited(params: &Params, s: &SParams, limit: u128) -> Result<SetQuantities> {
    let partitions = profile_partitions(params, false, limit)?;
    let counter = ProfileCounter::new(params);
    let tables = ProbabilityTables::new(params);
    let membership = s.membership(params);

    let mut max_dev = Rational::new();
    let mut pf_out = Integer::new();
    let mut pp_out = Integer::new();
    let mut in_s = 0u64;
    let mut enumerated = 0u64;
    for profile in partitions {
        enumerated += 1;
        let num = tables.perm_numerator(&profile);
        if membership.contains(&profile) {
            in_s += 1;
            let dev = (tables.ratio(&num) - 1u32).abs();
            if dev > max_dev {
                max_dev = dev;
            }
        } else {
            let count = counter.count(&profile);
            pp_out += (&count * &num).complete();
            pf_out += count;
        }
    }
    Ok(SetQuantities {
        max_ratio_dev: max_dev,
        pf_complement: Rational::from((pf_out, tables.func_den.clone())),
        pp_complement: Rational::from((pp_out, tables.perm_den)),
        profiles_in_s: in_s,
        profiles_enumerated: enumerated,
    })
}

/// Floating-point advantage from sums of log-falling-factorials, for
/// instances whose exact integers become unwieldy. Targets a relative error
/// of at most `1e-12` against the exact value.
pub fn exact_advantage_f64(params: &Params) -> Result<f64> {
    exact_advantage_f64_limited(params, DEFAULT_PROFILE_LIMIT)
}

pub fn exact_advantage_f64_limited(params: &Params, limit: u128) -> Result<f64> {
    let partitions = profile_partitions(params, true, limit)?;
    let q = params.q();
    let ln_fact = ln_factorials(q);
    let ln_alpha_falling = ln_falling_table(params.alphabet_size(), q.min(params.alphabet_size()));
    let ln_func = -(q as f64) * params.reply_bits() as f64 * std::f64::consts::LN_2;
    // ln P_p/P_f = sum_k ln prod_{i<d_k}(1 - i/2^m) - ln prod_{i<q}(1 - i/2^n),
    // kept as sums of small terms so exp_m1 sees no cancellation.
    let bucket_shrink = ln_shrink_table(params.bucket_capacity(), q.min(params.bucket_capacity()));
    let domain_shrink = ln_shrink_table(params.domain_size(), q)[q as usize];

    // Infeasible profiles have P_p = 0 < P_f, so the positive part of
    // P_p - P_f over feasible profiles is the whole advantage.
    let adv = partitions
        .par_bridge()
        .fold(
            || 0.0f64,
            |adv, profile| {
                let mut ln_count = ln_alpha_falling[profile.len()] + ln_fact[q as usize];
                let mut ln_ratio = -domain_shrink;
                for &d in profile.parts() {
                    ln_count -= ln_fact[d as usize];
                    ln_ratio += bucket_shrink[d as usize];
                }
                for mult in profile.part_multiplicities() {
                    ln_count -= ln_fact[mult as usize];
                }
                if ln_ratio > 0.0 {
                    adv + (ln_count + ln_func).exp() * ln_ratio.exp_m1()
                } else {
                    adv
                }
            },
        )
        .sum::<f64>();
    Ok(adv)
}

/// `ln prod_{i<d} (1 - i/x)` for `d = 0..=k`.
fn ln_shrink_table(x: u64, k: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for i in 0..k {
        acc += (-(i as f64) / x as f64).ln_1p();
        out.push(acc);
    }
    out
}

fn ln_factorials(k: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let mut acc = 0.0f64;
    out.push(0.0);
    for i in 1..=k {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `ln (x)_d` for `d = 0..=k`, accumulated with `ln_1p` for accuracy.
pub(crate) fn ln_falling_table(x: u64, k: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let ln_x = (x as f64).ln();
    let mut acc = 0.0f64;
    out.push(0.0);
    for i in 0..k {
        acc += ln_x + (-(i as f64) / x as f64).ln_1p();
        out.push(acc);
    }
    out
}

/// `1 - prod_{i<q} (1 - i/2^n)`: the exact advantage at `m = 0`.
pub fn collision_advantage(n: u32, q: u64) -> Rational {
    let domain = 1u64 << n;
    let num = falling(domain, q);
    let den = Integer::from(domain).pow(q as u32);
    Rational::from(1) - Rational::from((num, den))
}

/// Smallest `q` with exact advantage `>= 1/2`, by doubling then bisection
/// (the advantage is non-decreasing in `q`). `None` if not reached by
/// `2^n`. Each probe is subject to `limit`.
pub fn exact_q_half(n: u32, m: u32, limit: u128) -> Result<Option<u64>> {
    let top = Params::new(n, m, 1u64 << n)?;
    let half = Rational::from((1, 2));
    let reaches = |q: u64| -> Result<bool> {
        Ok(exact_advantage_limited(&top.with_q(q)?, limit)?.advantage >= half)
    };
    let mut below = 0u64;
    let mut q = 1u64;
    let mut hi = loop {
        if reaches(q)? {
            break q;
        }
        if q == top.q() {
            return Ok(None);
        }
        below = q;
        q = (q * 2).min(top.q());
    };
    while hi - below > 1 {
        let mid = below + (hi - below) / 2;
        if reaches(mid)? {
            hi = mid;
        } else {
            below = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, m: u32, q: u64) -> Params {
        Params::new(n, m, q).unwrap()
    }

    fn r(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    fn prof(parts: &[u64]) -> MultiplicityProfile {
        MultiplicityProfile::new(parts.to_vec()).unwrap()
    }

    /// All 12 ordered pairs of distinct outputs of a 4-element permutation,
    /// truncated by one bit.
    #[test]
    fn world_probabilities_match_pair_enumeration() {
        let mut same = 0;
        let mut distinct = 0;
        for a in 0..4u64 {
            for b in 0..4u64 {
                if a == b {
                    continue;
                }
                if a >> 1 == b >> 1 {
                    same += 1;
                } else {
                    distinct += 1;
                }
            }
        }
        // Two sequences per profile class on alphabet {0,1}.
        assert_eq!((same, distinct), (4, 8));
        let params = p(2, 1, 2);
        let w = world_probabilities(&prof(&[1, 1]), &params).unwrap();
        assert_eq!(w.p_perm, r(distinct, 12 * 2));
        assert_eq!(w.p_perm, r(1, 3));
        assert_eq!(w.p_func, r(1, 4));
        assert_eq!(w.ratio, r(4, 3));
        let w = world_probabilities(&prof(&[2]), &params).unwrap();
        assert_eq!(w.p_perm, r(same, 12 * 2));
        assert_eq!(w.p_perm, r(1, 6));
        assert_eq!(w.ratio, r(2, 3));
    }

    #[test]
    fn overfull_bucket_has_zero_probability() {
        let params = p(3, 1, 3);
        let w = world_probabilities(&prof(&[3]), &params).unwrap();
        assert_eq!(w.p_perm, 0);
        assert_eq!(w.ratio, 0);
        assert!(w.p_func > 0);
        assert!(world_probabilities(&prof(&[2]), &params).is_err());
    }

    #[test]
    fn advantage_examples() {
        assert_eq!(exact_advantage(&p(2, 1, 2)).unwrap().advantage, r(1, 6));
        assert_eq!(exact_advantage(&p(2, 0, 2)).unwrap().advantage, r(1, 4));
        assert_eq!(collision_advantage(2, 2), r(1, 4));
        for (n, m) in [(2, 1), (5, 3), (10, 4), (40, 20)] {
            assert_eq!(exact_advantage(&p(n, m, 1)).unwrap().advantage, 0);
        }
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_advantage(&p(2, 1, 2)).unwrap(), r(1, 6));
        for params in [p(2, 1, 4), p(3, 1, 3), p(3, 2, 5), p(4, 1, 5)] {
            assert_eq!(
                brute_force_advantage(&params).unwrap(),
                exact_advantage(&params).unwrap().advantage,
                "{params}"
            );
        }
        assert!(matches!(
            brute_force_advantage(&p(10, 0, 3)),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn likelihood_region_attains_advantage() {
        for params in [p(2, 1, 2), p(4, 2, 4), p(6, 2, 10), p(5, 0, 7)] {
            let rep = exact_advantage(&params).unwrap();
            let gap = (&rep.ml_threshold_mass - &rep.ml_threshold_func_mass).complete();
            assert_eq!(gap, rep.advantage, "{params}");
        }
    }

    #[test]
    fn capped_path_matches_uncapped_sum() {
        // Sum over every profile, including overfull ones, as a cross-check
        // of the complement shortcut.
        for params in [p(3, 1, 5), p(4, 2, 9), p(6, 1, 8)] {
            let tables = ProbabilityTables::new(&params);
            let mut total = Integer::new();
            for w in crate::profile::enumerate_profiles(&params, false).unwrap() {
                let num = tables.perm_numerator(&w.profile);
                total += w.count * (num * &tables.func_den - &tables.perm_den).abs();
            }
            let den = (&tables.perm_den * &tables.func_den).complete() * 2u32;
            assert_eq!(
                Rational::from((total, den)),
                exact_advantage(&params).unwrap().advantage
            );
        }
    }

    #[test]
    fn float_path_tracks_exact() {
        for params in [
            p(4, 2, 4),
            p(8, 2, 30),
            p(10, 3, 40),
            p(12, 4, 40),
            p(6, 0, 20),
        ] {
            let exact = exact_advantage(&params).unwrap().advantage.to_f64();
            let approx = exact_advantage_f64(&params).unwrap();
            let rel = ((approx - exact) / exact).abs();
            assert!(rel <= 1e-12, "{params}: {approx} vs {exact} rel {rel}");
        }
    }

    #[test]
    fn profile_sum_mismatch_is_rejected() {
        assert!(world_probabilities(&prof(&[1, 1]), &p(3, 1, 3)).is_err());
    }

    #[test]
    fn increment_wraps() {
        let mut w = vec![0, 2, 2];
        increment(&mut w, 3);
        assert_eq!(w, vec![1, 0, 0]);
        let mut w = vec![2, 2];
        increment(&mut w, 3);
        assert_eq!(w, vec![0, 0]);
    }

    #[test]
    fn exact_q_half_matches_collision_scan() {
        for n in [4u32, 6, 8] {
            assert_eq!(
                exact_q_half(n, 0, DEFAULT_PROFILE_LIMIT).unwrap(),
                Some(crate::bounds::collision_q_half(n))
            );
        }
        // n = 1: two queries give exactly 1/2.
        assert_eq!(exact_q_half(1, 0, DEFAULT_PROFILE_LIMIT).unwrap(), Some(2));
    }
}
