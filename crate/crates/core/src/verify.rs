//! Numerical verification suites.
//!
//! Each suite runs one family of checks over a parameter grid and returns a
//! [`Check`] per property: how many instances were examined, how many
//! failed, and the first failing instance. Defaults reproduce the
//! acceptance grids; [`VerifyConfig`] overrides them.

use std::fmt;

use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::bounds::{
    self, birthday_bounds, hall_bound, prop1_preconditions, prop1_ratio_bound, prop2_preconditions,
    prop2_ratio_bound, q_half_from_bound, s_to_adv_rhs, s_to_adv_rhs_at_choice, stam_bound,
    stam_simplified_bound, theorem1_params, theorem2_params, thm1_bound, thm2_applies, thm2_bound,
    BoundId, TailExponent, PREC,
};
use crate::distinguish::{empirical_q_half, hall_s_params, mc_advantage, Distinguisher, SParams};
use crate::error::{Error, Result};
use crate::exact::{brute_force_advantage, collision_advantage, exact_advantage, set_quantities};
use crate::format;
use crate::oracle::Params;
use crate::profile::{estimate_profile_count, expected_col, variance_bound_col};

/// Slack for comparisons against floating bound values.
pub const FLOAT_SLACK: f64 = 1e-12;

/// Profile-count ceiling for grid instances.
pub const GRID_PROFILE_LIMIT: u128 = 1_000_000;

/// `q` values of the default domination grid.
pub fn default_q_grid() -> Vec<u64> {
    (1..=6).chain((8..=40).step_by(2)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    ExactBrute,
    Birthday,
    Domination,
    Lemma1,
    SetLemma,
    MonteCarlo,
    Crossover,
    Determinism,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::ExactBrute,
        Suite::Birthday,
        Suite::Domination,
        Suite::Lemma1,
        Suite::SetLemma,
        Suite::MonteCarlo,
        Suite::Crossover,
        Suite::Determinism,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ExactBrute => "exact-brute",
            Suite::Birthday => "birthday",
            Suite::Domination => "domination",
            Suite::Lemma1 => "lemma1",
            Suite::SetLemma => "set-lemma",
            Suite::MonteCarlo => "monte-carlo",
            Suite::Crossover => "crossover",
            Suite::Determinism => "determinism",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Grid and sampling overrides. `None` keeps a suite's default.
#[derive(Debug, Clone, Default)]
pub struct VerifyConfig {
    pub n: Option<Vec<u32>>,
    pub m: Option<Vec<u32>>,
    pub q: Option<Vec<u64>>,
    /// Reply widths `n - m` (the moment suite only depends on these).
    pub reply_bits: Option<Vec<u32>>,
    pub trials: Option<u64>,
    pub seed: u64,
}

/// Outcome of one property over a suite's grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub property: String,
    pub instances: u64,
    pub failures: u64,
    /// First failing instance, if any.
    pub counterexample: Option<String>,
    /// Free-form summary such as the worst slack seen.
    pub detail: Option<String>,
}

impl Check {
    /// Passes when at least one instance ran and none failed.
    pub fn passed(&self) -> bool {
        self.instances > 0 && self.failures == 0
    }
}

#[derive(Debug)]
struct Tally {
    suite: Suite,
    property: String,
    instances: u64,
    failures: u64,
    counterexample: Option<String>,
    detail: Option<String>,
}

impl Tally {
    fn new(suite: Suite, property: impl Into<String>) -> Self {
        Self {
            suite,
            property: property.into(),
            instances: 0,
            failures: 0,
            counterexample: None,
            detail: None,
        }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.instances += 1;
        if !ok {
            self.failures += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(what());
            }
        }
    }

    fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    fn done(self) -> Check {
        Check {
            suite: self.suite,
            property: self.property,
            instances: self.instances,
            failures: self.failures,
            counterexample: self.counterexample,
            detail: self.detail,
        }
    }
}

/// A check that an instance count reaches a floor.
fn count_floor(suite: Suite, what: &str, count: u64, floor: u64) -> Check {
    let mut t = Tally::new(suite, format!("{what} >= {floor}"));
    t.record(count >= floor, || format!("only {count}"));
    t.detail(format!("{count}")).done()
}

pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<Vec<Check>> {
    match suite {
        Suite::ExactBrute => exact_brute(cfg),
        Suite::Birthday => birthday(cfg),
        Suite::Domination => domination(cfg),
        Suite::Lemma1 => lemma1(cfg),
        Suite::SetLemma => set_lemma(cfg),
        Suite::MonteCarlo => monte_carlo(cfg),
        Suite::Crossover => crossover(cfg),
        Suite::Determinism => determinism(cfg),
    }
}

fn to_float(r: &Rational) -> Float {
    Float::with_val(PREC, r)
}

/// `value <= bound + FLOAT_SLACK`.
fn below(value: &Rational, bound: &Float) -> bool {
    to_float(value) <= Float::with_val(PREC, bound + FLOAT_SLACK)
}

/// All valid `(n, m, q)` from the given axes, in grid order.
fn grid(ns: &[u32], ms: Option<&[u32]>, qs: &[u64]) -> Vec<Params> {
    let mut out = Vec::new();
    for &n in ns {
        let m_axis: Vec<u32> = match ms {
            Some(ms) => ms.to_vec(),
            None => (0..n).collect(),
        };
        for m in m_axis {
            for &q in qs {
                if let Ok(p) = Params::new(n, m, q) {
                    out.push(p);
                }
            }
        }
    }
    out
}

fn sequence_count(params: &Params) -> u128 {
    (params.alphabet_size() as u128)
        .checked_pow(params.q() as u32)
        .unwrap_or(u128::MAX)
}

fn exact_brute(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let ns = cfg.n.clone().unwrap_or_else(|| vec![2, 3, 4]);
    let qs = cfg.q.clone().unwrap_or_else(|| (1..=6).collect());
    let instances: Vec<Params> = grid(&ns, cfg.m.as_deref(), &qs)
        .into_iter()
        .filter(|p| sequence_count(p) <= crate::exact::BRUTE_FORCE_LIMIT)
        .collect();
    let results: Vec<Result<(Params, Rational, Rational)>> = instances
        .par_iter()
        .map(|p| Ok((*p, exact_advantage(p)?.advantage, brute_force_advantage(p)?)))
        .collect();
    let mut t = Tally::new(
        Suite::ExactBrute,
        "exact_advantage == brute_force_advantage",
    );
    for r in results {
        let (p, exact, brute) = r?;
        t.record(exact == brute, || {
            format!(
                "{p}: exact {} brute {}",
                format::rational(&exact),
                format::rational(&brute)
            )
        });
    }
    Ok(vec![t.done()])
}

fn birthday(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let ns = cfg.n.clone().unwrap_or_else(|| (1..=4).collect());
    let mut eq = Tally::new(
        Suite::Birthday,
        "exact_advantage(n,0,q) == 1 - prod(1 - i/2^n)",
    );
    let mut sandwich = Tally::new(Suite::Birthday, "birthday lower <= exact <= birthday upper");
    for n in ns {
        let qs: Vec<u64> = cfg.q.clone().unwrap_or_else(|| (1..=1u64 << n).collect());
        for q in qs {
            let Ok(p) = Params::new(n, 0, q) else {
                continue;
            };
            let adv = exact_advantage(&p)?.advantage;
            let closed = collision_advantage(n, q);
            eq.record(adv == closed, || {
                format!(
                    "{p}: exact {} closed form {}",
                    format::rational(&adv),
                    format::rational(&closed)
                )
            });
            let b = birthday_bounds(&p);
            let lo = b.lower.value().expect("m = 0");
            let hi = b.upper.value().expect("always applicable");
            let a = to_float(&adv);
            sandwich.record(
                *lo <= Float::with_val(PREC, &a + FLOAT_SLACK) && below(&adv, hi),
                || {
                    format!(
                        "{p}: {} not in [{}, {}]",
                        a.to_f64(),
                        lo.to_f64(),
                        hi.to_f64()
                    )
                },
            );
        }
    }
    Ok(vec![eq.done(), sandwich.done()])
}

/// The extended grid on which the second-case bound has a non-empty regime.
fn thm2_grid(qs: &[u64]) -> Vec<Params> {
    let mut out = Vec::new();
    for n in 13..=20u32 {
        for m in 0..n {
            if !thm2_applies(n, m) {
                continue;
            }
            for &q in qs {
                if let Ok(p) = Params::new(n, m, q) {
                    out.push(p);
                }
            }
        }
    }
    out
}

struct DominationRow {
    params: Params,
    advantage: Rational,
}

fn exact_rows(instances: Vec<Params>) -> Result<Vec<DominationRow>> {
    instances
        .into_par_iter()
        .filter(|p| estimate_profile_count(p, true) <= GRID_PROFILE_LIMIT)
        .map(|p| {
            Ok(DominationRow {
                params: p,
                advantage: exact_advantage(&p)?.advantage,
            })
        })
        .collect()
}

fn domination(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let ns = cfg.n.clone().unwrap_or_else(|| (2..=12).collect());
    let qs = cfg.q.clone().unwrap_or_else(default_q_grid);
    let rows = exact_rows(grid(&ns, cfg.m.as_deref(), &qs))?;
    let extended = if cfg.n.is_none() && cfg.m.is_none() {
        exact_rows(thm2_grid(&qs))?
    } else {
        Vec::new()
    };

    type BoundFn = fn(&Params) -> bounds::BoundValue;
    let birthday_upper: BoundFn = |p| birthday_bounds(p).upper;
    let checks: [(&str, BoundFn); 5] = [
        ("stam", stam_bound),
        ("stam-simplified", stam_simplified_bound),
        ("birthday-upper", birthday_upper),
        ("hall", hall_bound),
        ("thm1", thm1_bound),
    ];
    let mut out = vec![count_floor(
        Suite::Domination,
        "grid instances",
        rows.len() as u64,
        200,
    )];
    for (name, f) in checks {
        let mut t = Tally::new(
            Suite::Domination,
            format!("exact_advantage <= {name} + 1e-12"),
        );
        let mut min_gap = f64::INFINITY;
        for row in &rows {
            let b = f(&row.params);
            let Some(v) = b.value() else { continue };
            min_gap = min_gap.min(v.to_f64() - to_float(&row.advantage).to_f64());
            t.record(below(&row.advantage, v), || {
                format!(
                    "{}: exact {} > {name} {}",
                    row.params,
                    to_float(&row.advantage).to_f64(),
                    v.to_f64()
                )
            });
        }
        out.push(
            t.detail(format!("min gap {}", format::float(min_gap)))
                .done(),
        );
    }
    let mut t = Tally::new(Suite::Domination, "exact_advantage <= thm2 + 1e-12");
    let mut min_gap = f64::INFINITY;
    for row in rows.iter().chain(&extended) {
        let b = thm2_bound(&row.params);
        let Some(v) = b.value() else { continue };
        min_gap = min_gap.min(v.to_f64() - to_float(&row.advantage).to_f64());
        t.record(below(&row.advantage, v), || {
            format!(
                "{}: exact {} > thm2 {}",
                row.params,
                to_float(&row.advantage).to_f64(),
                v.to_f64()
            )
        });
    }
    out.push(
        t.detail(format!("min gap {}", format::float(min_gap)))
            .done(),
    );
    Ok(out)
}

/// `E_f col_j` and `E_f col_j^2` over all `A^q` sequences, counting
/// coincident `j`-subsets of positions directly.
fn brute_col_moments(params: &Params, j: u32) -> (Rational, Rational) {
    let a = params.alphabet_size();
    let q = params.q() as u32;
    let subsets: Vec<u32> = (0u32..1 << q).filter(|s| s.count_ones() == j).collect();
    let mut omega = vec![0u64; q as usize];
    let mut sum = Integer::new();
    let mut sum_sq = Integer::new();
    loop {
        let mut col = 0u64;
        for &s in &subsets {
            let first = omega[s.trailing_zeros() as usize];
            if (0..q)
                .filter(|i| s >> i & 1 == 1)
                .all(|i| omega[i as usize] == first)
            {
                col += 1;
            }
        }
        sum += col;
        sum_sq += col * col;
        // Advance the base-A odometer.
        let mut i = 0;
        while i < omega.len() {
            omega[i] += 1;
            if omega[i] < a {
                break;
            }
            omega[i] = 0;
            i += 1;
        }
        if i == omega.len() {
            break;
        }
    }
    let total = Integer::from(a).pow(q);
    (
        Rational::from((sum, total.clone())),
        Rational::from((sum_sq, total)),
    )
}

fn lemma1(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let widths = cfg.reply_bits.clone().unwrap_or_else(|| vec![1, 2]);
    let qs = cfg.q.clone().unwrap_or_else(|| (2..=6).collect());
    let mut mean = Tally::new(Suite::Lemma1, "brute E_f col_j == expected_col");
    let mut var = Tally::new(Suite::Lemma1, "brute Var_f col_j <= variance_bound_col");
    for &w in &widths {
        for &q in &qs {
            // The function-world moments depend only on the reply width.
            let p = Params::new(w + 3, 3, q)?;
            if sequence_count(&p) > crate::exact::BRUTE_FORCE_LIMIT {
                return Err(Error::Size {
                    what: "reply sequences",
                    estimate: sequence_count(&p),
                    limit: crate::exact::BRUTE_FORCE_LIMIT,
                });
            }
            for j in 2..=4u32 {
                if j > q as u32 {
                    continue;
                }
                let (e, e2) = brute_col_moments(&p, j);
                let expect = expected_col(&p, j);
                mean.record(e == expect, || {
                    format!(
                        "n-m={w}, q={q}, j={j}: {} vs {}",
                        format::rational(&e),
                        format::rational(&expect)
                    )
                });
                let v = e2 - Rational::from(&e * &e);
                let bound = variance_bound_col(&p, j);
                var.record(v <= bound, || {
                    format!(
                        "n-m={w}, q={q}, j={j}: {} > {}",
                        format::rational(&v),
                        format::rational(&bound)
                    )
                });
            }
        }
    }
    Ok(vec![mean.done(), var.done()])
}

/// One `(instance, S)` pair of the good-set suite and what to check on it.
struct SetCase {
    params: Params,
    label: String,
    s: SParams,
    /// Good-set thresholds at which the first-case ratio bound applies.
    prop1: Option<(f64, f64)>,
    /// `(t, alphas, beta)` for the general-`t` ratio bound.
    prop2: Option<(u32, Vec<f64>, f64)>,
    /// Whether these are the first-case theorem's chosen thresholds.
    theorem1: bool,
}

fn set_cases(cfg: &VerifyConfig) -> Vec<SetCase> {
    let mut cases = Vec::new();
    let push_t2 = |cases: &mut Vec<SetCase>, params: Params, label: String, s: SParams| {
        let (a, b) = (s.dev_for(2), s.beta());
        let prop1 = prop1_preconditions(&params, a, b).then_some((a, b));
        let prop2 = prop2_preconditions(&params, 2, &[a], b, TailExponent::ParameterLemma)
            .then(|| (2, vec![a], b));
        cases.push(SetCase {
            params,
            label,
            s,
            prop1,
            prop2,
            theorem1: false,
        });
    };

    // The collision-count set with no allowance for triples.
    let hall_ns = cfg.n.clone().unwrap_or_else(|| vec![4, 6, 8, 10]);
    let hall_qs = cfg.q.clone().unwrap_or_else(|| vec![2, 4, 8, 12, 16]);
    for params in grid(&hall_ns, cfg.m.as_deref(), &hall_qs) {
        for c in [0.5, 1.0, 2.0] {
            let s = hall_s_params(&params, c).expect("c > 0");
            push_t2(&mut cases, params, format!("hall c={c}"), s);
        }
    }

    // t = 2 with alpha a multiple of the standard deviation bound and a
    // triple cap meeting the ratio-bound requirement.
    let ns = cfg.n.clone().unwrap_or_else(|| vec![10, 12, 14]);
    let qs = cfg.q.clone().unwrap_or_else(|| vec![4, 8, 16, 24]);
    for params in grid(&ns, cfg.m.as_deref(), &qs) {
        if params.m() < 2 || 2 * params.m() > params.n() {
            continue;
        }
        let sd = variance_bound_col(&params, 2).to_f64().sqrt();
        let beta = beta_floor(&params, 2) * 1.5 + f64::MIN_POSITIVE;
        for c in [1.0, 2.0, 4.0] {
            let s = SParams::new(2, vec![c * sd], beta).expect("positive thresholds");
            push_t2(&mut cases, params, format!("t=2 alpha={c}sd"), s);
        }
        // t = 3 counterpart.
        let sd3 = variance_bound_col(&params, 3).to_f64().sqrt();
        let beta3 = beta_floor(&params, 3) * 1.5 + f64::MIN_POSITIVE;
        let alphas = vec![2.0 * sd, 2.0 * sd3 + f64::MIN_POSITIVE];
        let s = SParams::new(3, alphas.clone(), beta3).expect("positive thresholds");
        let prop2 = prop2_preconditions(&params, 3, &alphas, beta3, TailExponent::ParameterLemma)
            .then_some((3, alphas, beta3));
        cases.push(SetCase {
            params,
            label: "t=3 alpha=2sd".into(),
            s,
            prop1: None,
            prop2,
            theorem1: false,
        });
    }

    if cfg.n.is_none() && cfg.m.is_none() {
        // The first-case theorem's thresholds.
        for (n, m, qmax) in [(18u32, 6u32, 40u64), (21, 7, 40), (24, 8, 40)] {
            for q in 2..=qmax {
                let params = Params::new(n, m, q).expect("valid");
                let Ok(choice) = theorem1_params(&params) else {
                    continue;
                };
                let s = choice.s_params();
                let (a, b) = (s.dev_for(2), s.beta());
                let prop1 = prop1_preconditions(&params, a, b).then_some((a, b));
                cases.push(SetCase {
                    params,
                    label: "theorem-1 thresholds".into(),
                    s,
                    prop1,
                    prop2: None,
                    theorem1: true,
                });
            }
        }
        // The second-case theorem's thresholds.
        for params in thm2_grid(&[4, 8, 16, 24, 32, 40]) {
            let Ok(choice) = theorem2_params(&params) else {
                continue;
            };
            let s = choice.s_params();
            let alphas = s.dev().to_vec();
            let prop2 = prop2_preconditions(
                &params,
                s.t(),
                &alphas,
                s.beta(),
                TailExponent::ParameterLemma,
            )
            .then(|| (s.t(), alphas, s.beta()));
            cases.push(SetCase {
                params,
                label: format!("theorem-2 thresholds t={}", s.t()),
                s,
                prop1: None,
                prop2,
                theorem1: false,
            });
        }
    }
    cases
}

/// `2 C(q, t+1) / 2^(t(n-m))`, the smallest admissible cap on `col_(t+1)`.
fn beta_floor(params: &Params, t: u32) -> f64 {
    let num = Integer::from(params.q()).binomial(t + 1) * 2u32;
    Rational::from((num, Integer::from(1) << (t * params.reply_bits()))).to_f64()
}

fn set_lemma(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let cases: Vec<SetCase> = set_cases(cfg)
        .into_iter()
        .filter(|c| estimate_profile_count(&c.params, false) <= GRID_PROFILE_LIMIT)
        .collect();
    let evaluated: Vec<Result<(Rational, crate::exact::SetQuantities)>> = cases
        .par_iter()
        .map(|c| {
            Ok((
                exact_advantage(&c.params)?.advantage,
                set_quantities(&c.params, &c.s)?,
            ))
        })
        .collect();

    let mut decomposition = Tally::new(
        Suite::SetLemma,
        "exact_advantage <= max_ratio_dev + pf_complement",
    );
    let mut prop1 = Tally::new(
        Suite::SetLemma,
        "in-S ratio deviation <= first-case ratio bound",
    );
    let mut prop2 = Tally::new(
        Suite::SetLemma,
        "in-S ratio deviation <= general-t ratio bound",
    );
    let mut rhs_vs_thm = Tally::new(
        Suite::SetLemma,
        "combination rhs at chosen thresholds <= thm1 + 1e-12",
    );
    let mut rhs_closed = Tally::new(Suite::SetLemma, "combination rhs matches its closed form");
    let mut adv_vs_rhs = Tally::new(Suite::SetLemma, "exact_advantage <= combination rhs");
    let mut hall_pairs = 0u64;

    for (case, r) in cases.iter().zip(evaluated) {
        let (adv, sq) = r?;
        let p = &case.params;
        hall_pairs += case.label.starts_with("hall") as u64;
        let bound = sq.advantage_bound();
        decomposition.record(adv <= bound, || {
            format!(
                "{p} {}: {} > {}",
                case.label,
                format::decimal(&adv),
                format::decimal(&bound)
            )
        });
        if let Some((a, b)) = case.prop1 {
            let rb = prop1_ratio_bound(p, a, b);
            prop1.record(sq.max_ratio_dev <= rb, || {
                format!(
                    "{p} {}: {} > {}",
                    case.label,
                    format::decimal(&sq.max_ratio_dev),
                    format::decimal(&rb)
                )
            });
        }
        if let Some((t, alphas, b)) = &case.prop2 {
            let rb = prop2_ratio_bound(p, *t, alphas, *b);
            prop2.record(sq.max_ratio_dev <= rb, || {
                format!(
                    "{p} {}: {} > {}",
                    case.label,
                    format::decimal(&sq.max_ratio_dev),
                    format::decimal(&rb)
                )
            });
        }
        if case.theorem1 {
            let choice = theorem1_params(p)?;
            let rhs = s_to_adv_rhs(p, &choice.alpha, &choice.beta);
            let thm = thm1_bound(p);
            let thm = thm.value().expect("in regime");
            rhs_vs_thm.record(rhs <= Float::with_val(PREC, thm + FLOAT_SLACK), || {
                format!("{p}: rhs {} > thm1 {}", rhs.to_f64(), thm.to_f64())
            });
            let closed = s_to_adv_rhs_at_choice(p);
            let rel = Float::with_val(PREC, &rhs - &closed).abs() / &closed;
            rhs_closed.record(rel <= FLOAT_SLACK, || {
                format!(
                    "{p}: rhs {} vs closed form {}",
                    rhs.to_f64(),
                    closed.to_f64()
                )
            });
            adv_vs_rhs.record(below(&adv, &rhs), || {
                format!(
                    "{p}: exact {} > rhs {}",
                    to_float(&adv).to_f64(),
                    rhs.to_f64()
                )
            });
        }
    }

    // How often the as-printed exponent changes the general-t verdict.
    let mut disagree = 0u64;
    let mut examined = 0u64;
    for case in &cases {
        let alphas = case.s.dev();
        let (t, b) = (case.s.t(), case.s.beta());
        let lemma = prop2_preconditions(&case.params, t, alphas, b, TailExponent::ParameterLemma);
        let printed = prop2_preconditions(&case.params, t, alphas, b, TailExponent::AsPrinted);
        examined += 1;
        disagree += (lemma != printed) as u64;
    }
    let prop2 = prop2.detail(format!(
        "tail exponent forms disagree on {disagree} of {examined} pairs"
    ));

    Ok(vec![
        count_floor(
            Suite::SetLemma,
            "(instance, S) pairs",
            cases.len() as u64,
            50,
        ),
        count_floor(
            Suite::SetLemma,
            "collision-count (t=2, beta=0) pairs",
            hall_pairs,
            1,
        ),
        decomposition.done(),
        prop1.done(),
        prop2.done(),
        rhs_vs_thm.done(),
        rhs_closed.done(),
        adv_vs_rhs.done(),
    ])
}

/// Calibration instance for the Monte Carlo suite.
pub const MC_CALIBRATION: (u32, u32, u64) = (8, 2, 64);
/// Trials per world for calibration runs.
pub const MC_CALIBRATION_TRIALS: u64 = 100_000;
/// Trials per world for each evaluation of the `q_1/2` search.
pub const MC_QHALF_TRIALS: u64 = 10_000;

/// Per-`m` result of the empirical `q_1/2` scaling check at `n = 16`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: u32,
    pub m: u32,
    pub q_half: Option<u64>,
    /// `q_half / 2^((n+m)/2)`.
    pub normalized: Option<f64>,
}

/// Empirical `q_1/2` of the likelihood-ratio test for each `m`.
pub fn q_half_scaling(n: u32, ms: &[u32], trials: u64, seed: u64) -> Result<Vec<ScalingRow>> {
    ms.iter()
        .map(|&m| {
            let est = empirical_q_half(
                |_| Distinguisher::LikelihoodRatio,
                n,
                m,
                1 << n,
                trials,
                seed,
            )?;
            let q_half = est.q();
            Ok(ScalingRow {
                n,
                m,
                q_half,
                normalized: q_half.map(|q| q as f64 / 2f64.powf((n + m) as f64 / 2.0)),
            })
        })
        .collect()
}

fn monte_carlo(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let (n, m, q) = MC_CALIBRATION;
    let params = Params::new(n, m, q)?;
    let exact = exact_advantage(&params)?.advantage.to_f64();
    let trials = cfg.trials.unwrap_or(MC_CALIBRATION_TRIALS);
    let mut hits = 0u64;
    let mut misses = Vec::new();
    for rep in 0..10u64 {
        let seed = cfg.seed.wrapping_add(rep);
        let est = mc_advantage(&Distinguisher::LikelihoodRatio, &params, trials, seed)?;
        if est.covers(exact) {
            hits += 1;
        } else {
            misses.push(format!(
                "seed {seed}: {} +- {}",
                est.point, est.ci_half_width
            ));
        }
    }
    let mut calib = Tally::new(
        Suite::MonteCarlo,
        format!("99% CI covers exact at {params} in >= 9/10 seeds"),
    );
    calib.record(hits >= 9, || {
        format!("{hits}/10 covered; {}", misses.join("; "))
    });
    let calib = calib.detail(format!("{hits}/10 covered, exact {exact}"));

    let qhalf_trials = cfg
        .trials
        .map_or(MC_QHALF_TRIALS, |t| t.min(MC_QHALF_TRIALS));
    let rows = q_half_scaling(16, &[0, 4, 8], qhalf_trials, cfg.seed)?;
    let mut norm = Tally::new(
        Suite::MonteCarlo,
        "q_1/2 / 2^((n+m)/2) in [0.25, 8] at n=16",
    );
    for r in &rows {
        norm.record(
            r.normalized.is_some_and(|x| (0.25..=8.0).contains(&x)),
            || {
                format!(
                    "m={}: q_1/2 {:?}, normalized {:?}",
                    r.m, r.q_half, r.normalized
                )
            },
        );
    }
    let mut step = Tally::new(Suite::MonteCarlo, "q_1/2 ratio between m and m+4 in [2, 8]");
    for w in rows.windows(2) {
        let ratio = match (w[0].q_half, w[1].q_half) {
            (Some(a), Some(b)) => Some(b as f64 / a as f64),
            _ => None,
        };
        step.record(ratio.is_some_and(|x| (2.0..=8.0).contains(&x)), || {
            format!("m={}..{}: ratio {ratio:?}", w[0].m, w[1].m)
        });
    }
    let table = rows
        .iter()
        .map(|r| {
            format!(
                "m={}:{}",
                r.m,
                r.q_half.map_or("-".into(), |q| q.to_string())
            )
        })
        .collect::<Vec<_>>()
        .join(" ");
    Ok(vec![
        calib.done(),
        norm.detail(table.clone()).done(),
        step.detail(table).done(),
    ])
}

/// First-uncertified `q` of each bound at `n`, per `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrossoverRow {
    pub n: u32,
    pub m: u32,
    pub hall: Option<u64>,
    pub birthday: Option<u64>,
    pub stam: Option<u64>,
}

pub fn crossover_table(n: u32, ms: &[u32]) -> Result<Vec<CrossoverRow>> {
    ms.iter()
        .map(|&m| {
            let first = |b| q_half_from_bound(b, n, m).map(|r| r.first_uncertified);
            Ok(CrossoverRow {
                n,
                m,
                hall: first(BoundId::Hall)?,
                birthday: first(BoundId::BirthdayUpper)?,
                stam: first(BoundId::Stam)?,
            })
        })
        .collect()
}

fn crossover(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let n = cfg
        .n
        .as_ref()
        .and_then(|v| v.first().copied())
        .unwrap_or(32);
    let ms: Vec<u32> = cfg.m.clone().unwrap_or_else(|| (n / 4 + 1..n).collect());
    let rows = crossover_table(n, &ms)?;
    let mut t = Tally::new(
        Suite::Crossover,
        format!("hall q_1/2 estimate below birthday's for m > n/4 at n={n}"),
    );
    for r in &rows {
        let ok = match (r.hall, r.birthday) {
            (Some(h), Some(b)) => h < b,
            (Some(_), None) => true,
            _ => false,
        };
        t.record(ok, || {
            format!("m={}: hall {:?} birthday {:?}", r.m, r.hall, r.birthday)
        });
    }
    let summary = rows
        .iter()
        .map(|r| format!("m={}:{}/{}", r.m, opt(r.hall), opt(r.birthday)))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(vec![t.detail(summary).done()])
}

fn opt(v: Option<u64>) -> String {
    v.map_or("-".into(), |x| x.to_string())
}

fn determinism(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let (n, m, q) = MC_CALIBRATION;
    let params = Params::new(n, m, q)?;
    let trials = cfg.trials.unwrap_or(20_000);
    let run = |threads: usize| -> Result<(crate::distinguish::AdvEstimate, Rational)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
        pool.install(|| {
            Ok((
                mc_advantage(&Distinguisher::LikelihoodRatio, &params, trials, cfg.seed)?,
                exact_advantage(&Params::new(8, 2, 24)?)?.advantage,
            ))
        })
    };
    let (a1, e1) = run(1)?;
    let (a4, e4) = run(4)?;
    let mut mc = Tally::new(
        Suite::Determinism,
        "mc_advantage identical under 1 and 4 workers",
    );
    mc.record(a1 == a4, || format!("{a1:?} vs {a4:?}"));
    let mut ex = Tally::new(
        Suite::Determinism,
        "exact_advantage identical under 1 and 4 workers",
    );
    ex.record(e1 == e4, || {
        format!("{} vs {}", format::rational(&e1), format::rational(&e4))
    });
    Ok(vec![mc.done(), ex.done()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn brute_moments_small() {
        // A = 2, q = 2: col_2 is 1 with probability 1/2.
        let p = Params::new(4, 3, 2).unwrap();
        let (e, e2) = brute_col_moments(&p, 2);
        assert_eq!(e, Rational::from((1, 2)));
        assert_eq!(e2, Rational::from((1, 2)));
    }

    #[test]
    fn small_suites_pass() {
        let cfg = VerifyConfig::default();
        for s in [Suite::Lemma1, Suite::Birthday, Suite::Crossover] {
            for c in run_suite(s, &cfg).unwrap() {
                assert!(c.passed(), "{c:?}");
            }
        }
    }

    #[test]
    fn overridden_grid() {
        let cfg = VerifyConfig {
            n: Some(vec![3]),
            q: Some(vec![1, 2, 3]),
            ..Default::default()
        };
        let checks = run_suite(Suite::ExactBrute, &cfg).unwrap();
        assert_eq!(checks[0].instances, 9);
        assert!(checks[0].passed());
    }
}
