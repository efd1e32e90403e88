//! Closed-form advantage bounds, their preconditions, the parameter choices
//! that realise them, and `q_1/2` searches.
//!
//! Bound values are evaluated in 128-bit-mantissa floats. Every precondition
//! that is algebraic in `(n, m, q)` and the chosen thresholds is decided in
//! exact rational arithmetic; the few that involve cube roots or square
//! roots of the instance are decided in 128-bit floats.
//!
//! Throughout, `x = q / 2^((n+m)/2)`.

use std::fmt;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::oracle::Params;

/// Mantissa bits for bound evaluation.
pub const PREC: u32 = 128;

fn fl<T>(v: T) -> Float
where
    Float: rug::Assign<T>,
{
    Float::with_val(PREC, v)
}

fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from(Integer::from(1) << e as u32)
    } else {
        Rational::from((Integer::from(1), Integer::from(1) << (-e) as u32))
    }
}

fn binom(n: u64, k: u32) -> Integer {
    Integer::from(n).binomial(k)
}

/// A bound evaluation, or the reason it does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundValue {
    value: Option<Float>,
    reason: Option<String>,
}

impl BoundValue {
    pub fn applicable(value: Float) -> Self {
        debug_assert!(value.is_nan() || value >= 0);
        Self {
            value: Some(value),
            reason: None,
        }
    }

    pub fn not_applicable(reason: impl Into<String>) -> Self {
        Self {
            value: None,
            reason: Some(reason.into()),
        }
    }

    pub fn is_applicable(&self) -> bool {
        self.value.is_some()
    }

    pub fn value(&self) -> Option<&Float> {
        self.value.as_ref()
    }

    pub fn to_f64(&self) -> Option<f64> {
        self.value.as_ref().map(Float::to_f64)
    }

    pub fn reason(&self) -> Option<&str> {
        self.reason.as_deref()
    }
}

/// `x = q / 2^((n+m)/2)`.
pub fn scaled_queries(params: &Params) -> Float {
    let half = fl(params.n() + params.m()) / 2u32;
    fl(params.q()) / half.exp2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BirthdayBounds {
    /// `1 - exp(-q(q-1)/2^(n+1))`; a lower bound on the advantage only
    /// when nothing is truncated.
    pub lower: BoundValue,
    /// `q(q-1)/2^(n+1)`; valid for every `m`.
    pub upper: BoundValue,
}

pub fn birthday_bounds(params: &Params) -> BirthdayBounds {
    let q = params.q();
    let t = fl(q) * fl(q - 1) / fl(params.n() + 1).exp2();
    let lower = if params.m() == 0 {
        BoundValue::applicable(-(fl(-&t).exp_m1()))
    } else {
        BoundValue::not_applicable("lower birthday bound needs m = 0")
    };
    BirthdayBounds {
        lower,
        upper: BoundValue::applicable(t),
    }
}

pub fn hall_value(n: u32, m: u32, x: &Float) -> Float {
    let first = fl(x).pow(fl(2) / 3u32) * 5u32;
    let exp = -(fl(n as i64 - 7 * m as i64) / 2u32);
    let second = fl(x).pow(3u32) * exp.exp2() / 2u32;
    first + second
}

/// `5 x^(2/3) + x^3 2^(-(n-7m)/2) / 2`.
pub fn hall_bound(params: &Params) -> BoundValue {
    BoundValue::applicable(hall_value(params.n(), params.m(), &scaled_queries(params)))
}

/// `(1/2) sqrt((2^(n-m) - 1) q (q-1) / ((2^n - 1)(2^n - (q-1))))`, valid for all `m < n`.
pub fn stam_bound(params: &Params) -> BoundValue {
    let q = params.q();
    if q > params.domain_size() {
        return BoundValue::not_applicable("needs q - 1 < 2^n");
    }
    let num = fl(params.alphabet_size() - 1) * fl(q) * fl(q - 1);
    let den = fl(params.domain_size() - 1) * fl(params.domain_size() - (q - 1));
    BoundValue::applicable((num / den).sqrt() / 2u32)
}

/// Weaker closed form `x / (2 sqrt(1 - (q-1)/2^n))` of the Stam bound.
pub fn stam_simplified_bound(params: &Params) -> BoundValue {
    let q = params.q();
    if q > params.domain_size() {
        return BoundValue::not_applicable("needs q - 1 < 2^n");
    }
    let shrink = fl(1) - fl(q - 1) / fl(params.domain_size());
    BoundValue::applicable(scaled_queries(params) / (shrink.sqrt() * 2u32))
}

pub fn thm1_value(x: &Float) -> Float {
    let a = fl(2).cbrt() * 2u32 * fl(x).pow(fl(2) / 3u32);
    let b = fl(8).sqrt() / fl(3).sqrt() * fl(x).pow(fl(3) / 2u32);
    let c = fl(x).pow(2u32);
    a + b + c
}

/// Theorem-1 regime: `3m <= n`.
pub fn thm1_applies(n: u32, m: u32) -> bool {
    3 * m <= n
}

/// `2 cbrt(2) x^(2/3) + (2 sqrt 2 / sqrt 3) x^(3/2) + x^2` for `m <= n/3`.
pub fn thm1_bound(params: &Params) -> BoundValue {
    if !thm1_applies(params.n(), params.m()) {
        return BoundValue::not_applicable("needs m <= n/3");
    }
    BoundValue::applicable(thm1_value(&scaled_queries(params)))
}

pub fn thm2_value(n: u32, m: u32, x: &Float) -> Float {
    let a = fl(x).pow(fl(2) / 3u32) * 3u32;
    let b = fl(x) * 2u32;
    let c = fl(x).pow(2u32) * 5u32;
    let d = (fl(x) * 2u32).pow(fl(n) / fl(n - m)) / 2u32;
    a + b + c + d
}

/// Theorem-2 regime `n/3 < m <= n - 4 - log2 n`, decided as
/// `3m > n` and `2^(n-4-m) >= n`.
pub fn thm2_applies(n: u32, m: u32) -> bool {
    if 3 * m <= n || m + 4 > n {
        return false;
    }
    let e = n - 4 - m;
    e >= 7 || (1u64 << e) >= n as u64
}

/// `3 x^(2/3) + 2x + 5x^2 + (1/2)(2x)^(n/(n-m))` for `n/3 < m <= n - 4 - log2 n`.
pub fn thm2_bound(params: &Params) -> BoundValue {
    if !thm2_applies(params.n(), params.m()) {
        return BoundValue::not_applicable("needs n/3 < m <= n - 4 - log2 n");
    }
    BoundValue::applicable(thm2_value(params.n(), params.m(), &scaled_queries(params)))
}

/// Bound families available to `q_half_from_bound` and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundId {
    BirthdayUpper,
    Hall,
    Stam,
    StamSimplified,
    Thm1,
    Thm2,
}

impl BoundId {
    pub const ALL: [BoundId; 6] = [
        BoundId::BirthdayUpper,
        BoundId::Hall,
        BoundId::Stam,
        BoundId::StamSimplified,
        BoundId::Thm1,
        BoundId::Thm2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundId::BirthdayUpper => "birthday-upper",
            BoundId::Hall => "hall",
            BoundId::Stam => "stam",
            BoundId::StamSimplified => "stam-simplified",
            BoundId::Thm1 => "thm1",
            BoundId::Thm2 => "thm2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.name() == s)
    }

    pub fn evaluate(self, params: &Params) -> BoundValue {
        match self {
            BoundId::BirthdayUpper => birthday_bounds(params).upper,
            BoundId::Hall => hall_bound(params),
            BoundId::Stam => stam_bound(params),
            BoundId::StamSimplified => stam_simplified_bound(params),
            BoundId::Thm1 => thm1_bound(params),
            BoundId::Thm2 => thm2_bound(params),
        }
    }
}

impl fmt::Display for BoundId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Outcome of searching for the first `q` at which a bound reaches 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundQHalf {
    /// Largest `q` at which the bound still certifies `Adv < 1/2`
    /// (`None` if even `q = 1` is not certified).
    pub last_certified: Option<u64>,
    /// Smallest `q` at which the bound is `>= 1/2`, i.e. the bound's
    /// lower estimate of `q_1/2`; `None` if certified up to `2^n`.
    pub first_uncertified: Option<u64>,
}

/// Smallest `q <= 2^n` with `bound >= 1/2`, by doubling then bisection.
/// Assumes the bound is non-decreasing in `q`.
pub fn q_half_from_bound(bound: BoundId, n: u32, m: u32) -> Result<BoundQHalf> {
    let top = Params::new(n, m, 1u64 << n)?;
    let probe = |q: u64| -> Result<Option<bool>> {
        let v = bound.evaluate(&top.with_q(q)?);
        Ok(v.value().map(|f| *f >= 0.5))
    };
    let max_q = top.q();
    let mut below = 0u64;
    let mut q = 1u64;
    let mut seen_applicable = false;
    let hi = loop {
        match probe(q)? {
            Some(true) => break q,
            Some(false) => {
                seen_applicable = true;
                below = q;
            }
            None if !seen_applicable && q >= max_q => {
                return Err(Error::Regime(format!(
                    "{bound} does not apply at n={n}, m={m}"
                )));
            }
            None => {}
        }
        if q >= max_q {
            return Ok(BoundQHalf {
                last_certified: Some(below),
                first_uncertified: None,
            });
        }
        q = (q * 2).min(max_q);
    };
    let mut hi = hi;
    let mut lo = below;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if probe(mid)? == Some(true) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(BoundQHalf {
        last_certified: (lo > 0).then_some(lo),
        first_uncertified: Some(hi),
    })
}

/// Smallest `q` with `1 - prod_{i<q}(1 - i/2^n) >= 1/2`, i.e. the true
/// `q_1/2` when nothing is truncated. Scans in floating point.
pub fn collision_q_half(n: u32) -> u64 {
    let domain = fl(1u64 << n);
    let mut survive = fl(1);
    for q in 1..=(1u64 << n) {
        // survive = prod_{i<q} (1 - i/2^n)
        survive *= fl(1) - fl(q - 1) / &domain;
        if survive <= 0.5 {
            return q;
        }
    }
    1u64 << n
}

/// Thresholds chosen for the `m <= n/3` argument.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Params {
    pub alpha: Float,
    pub beta: Float,
}

impl Theorem1Params {
    /// Good-set parameters `t = 2`, `dev_2 = alpha`, `beta`.
    pub fn s_params(&self) -> crate::distinguish::SParams {
        crate::distinguish::SParams::new(2, vec![self.alpha.to_f64()], self.beta.to_f64())
            .expect("theorem-1 thresholds are positive")
    }
}

/// `alpha = 2^m x^(2/3) / cbrt(4)`,
/// `beta = 2^(2m) x^(3/2) / (2 sqrt 6 2^((n-3m)/4))`,
/// for `6 <= m <= n/3` and `q < 2^((n+m)/2)/4`.
pub fn theorem1_params(params: &Params) -> Result<Theorem1Params> {
    let (n, m, q) = (params.n(), params.m(), params.q());
    if m < 6 || !thm1_applies(n, m) {
        return Err(Error::Regime(format!(
            "needs 6 <= m <= n/3, got n={n}, m={m}"
        )));
    }
    // 4q < 2^((n+m)/2)  <=>  16 q^2 < 2^(n+m)
    if Integer::from(q).pow(2u32) * 16u32 >= Integer::from(1) << (n + m) {
        return Err(Error::Regime(format!("needs q < 2^((n+m)/2)/4, got q={q}")));
    }
    let x = scaled_queries(params);
    let alpha = fl(m).exp2() / fl(4).cbrt() * fl(&x).pow(fl(2) / 3u32);
    let quarter = fl(n as i64 - 3 * m as i64) / 4u32;
    let beta = fl(2 * m).exp2() / (fl(6).sqrt() * 2u32 * quarter.exp2()) * fl(&x).pow(fl(3) / 2u32);
    let out = Theorem1Params { alpha, beta };
    let s = out.s_params();
    if !s_to_adv_preconditions(params, s.dev_for(2), s.beta()) {
        return Err(Error::Regime(format!(
            "internal: chosen thresholds violate the good-set lemma preconditions at {params}"
        )));
    }
    Ok(out)
}

/// Preconditions of the first-case combination lemma, decided exactly:
/// `q <= 2^(n-1)`, `alpha/2^m + (2/3) q^3/2^(2n) <= 1/2`,
/// `x^2 + 2 alpha/2^(2m) <= (1/2)(1/2 - 1/2^m)`,
/// `beta >= 2 C(q,3) / 2^(2(n-m))`.
pub fn s_to_adv_preconditions(params: &Params, alpha: f64, beta: f64) -> bool {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    let (Some(alpha), Some(beta)) = (Rational::from_f64(alpha), Rational::from_f64(beta)) else {
        return false;
    };
    if q > 1u64 << (n - 1) {
        return false;
    }
    let half = Rational::from((1, 2));
    let q3 = Rational::from(Integer::from(q).pow(3u32));
    let c1 = (&alpha * pow2(-m)) + q3 * Rational::from((2, 3)) * pow2(-2 * n);
    let x2 = Rational::from(Integer::from(q).pow(2u32)) * pow2(-(n + m));
    let c2 = x2 + (&alpha * pow2(1 - 2 * m));
    let c2_rhs = (&half - pow2(-m)) * &half;
    let c3 = Rational::from(binom(q, 3) * 2u32) * pow2(-2 * (n - m));
    c1 <= half && c2 <= c2_rhs && beta >= c3
}

/// Right-hand side of the first-case combination lemma:
/// `x^2 + (2 alpha/2^m + (x^2/2)(2^m/alpha)^2)
///  + (4 beta/2^(2m) + x^3 2^(2m) / (6 2^((n-3m)/2) beta))`.
pub fn s_to_adv_rhs(params: &Params, alpha: &Float, beta: &Float) -> Float {
    let (n, m) = (params.n() as i64, params.m() as i64);
    let x = scaled_queries(params);
    let two_m = fl(m).exp2();
    let x2 = fl(&x).pow(2u32);
    let x3 = fl(&x).pow(3u32);
    let alpha_term = fl(alpha) * 2u32 / &two_m + fl(&x2) / 2u32 * (fl(&two_m) / alpha).pow(2u32);
    let beta_term = fl(beta) * 4u32 / fl(2 * m).exp2()
        + x3 * fl(2 * m).exp2() / (fl(6) * (fl(n - 3 * m) / 2u32).exp2() * beta);
    x2 + alpha_term + beta_term
}

/// Closed form of `s_to_adv_rhs` at the theorem-1 thresholds:
/// `x^2 + 2 cbrt(2) x^(2/3) + 2 sqrt 2 x^(3/2) / (sqrt 3 2^((n-3m)/4))`.
pub fn s_to_adv_rhs_at_choice(params: &Params) -> Float {
    let (n, m) = (params.n() as i64, params.m() as i64);
    let x = scaled_queries(params);
    let quarter = (fl(n - 3 * m) / 4u32).exp2();
    fl(&x).pow(2u32)
        + fl(2).cbrt() * 2u32 * fl(&x).pow(fl(2) / 3u32)
        + fl(8).sqrt() / (fl(3).sqrt() * quarter) * fl(&x).pow(fl(3) / 2u32)
}

/// Preconditions of the first-case ratio bound, decided exactly:
/// `q <= 2^(n-1)`, `alpha/2^m + (2/3) q^3/2^(2n) <= 1/2`,
/// `C(q,2)/2^(n-m) + alpha <= C(2^(m-1), 2)`, `beta >= 2 C(q,3)/2^(2(n-m))`.
pub fn prop1_preconditions(params: &Params, alpha: f64, beta: f64) -> bool {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    let (Some(alpha), Some(beta)) = (Rational::from_f64(alpha), Rational::from_f64(beta)) else {
        return false;
    };
    if m < 1 || q > 1u64 << (n - 1) {
        return false;
    }
    let q3 = Rational::from(Integer::from(q).pow(3u32));
    let c1 = (&alpha * pow2(-m)) + q3 * Rational::from((2, 3)) * pow2(-2 * n);
    let c2 = Rational::from(binom(q, 2)) * pow2(-(n - m)) + &alpha;
    let c2_rhs = Rational::from(binom(1u64 << (m - 1), 2));
    let c3 = Rational::from(binom(q, 3) * 2u32) * pow2(-2 * (n - m));
    c1 <= Rational::from((1, 2)) && c2 <= c2_rhs && beta >= c3
}

/// `2 alpha/2^m + 2 C(q,2)/2^(n+m) + 4 beta/2^(2m)`, exact.
pub fn prop1_ratio_bound(params: &Params, alpha: f64, beta: f64) -> Rational {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    let alpha = Rational::from_f64(alpha).expect("finite alpha");
    let beta = Rational::from_f64(beta).expect("finite beta");
    alpha * pow2(1 - m) + Rational::from(binom(q, 2)) * pow2(1 - (n + m)) + beta * pow2(2 - 2 * m)
}

/// Which exponent to use in the `t`-dependent precondition term
/// `2^((n-m)/2 (t - e))`. The general-case statement prints
/// `e = (n+m)/(n+m)`, while the parameter lemma uses `e = (n+m)/(n-m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailExponent {
    /// `e = (n+m)/(n-m)`.
    ParameterLemma,
    /// `e = (n+m)/(n+m) = 1`, as printed.
    AsPrinted,
}

/// Base-2 exponent `E` such that
/// `2^((n-m)/2 (t-e)) * 2^((n+m)(t+1)/2) = 2^E`.
fn tail_exponent(n: i64, m: i64, t: i64, form: TailExponent) -> i64 {
    match form {
        // ((n-m)t - (n+m) + (n+m)(t+1)) / 2 = n t
        TailExponent::ParameterLemma => n * t,
        // ((n-m)(t-1) + (n+m)(t+1)) / 2 = n t + m
        TailExponent::AsPrinted => n * t + m,
    }
}

/// `(j-1)! / 2^(j m)` as a rational.
fn weight(j: u32, m: i64) -> Rational {
    let fact = Integer::from(Integer::factorial(j - 1));
    Rational::from(fact) * pow2(-(j as i64) * m)
}

/// Exact preconditions of the general-`t` ratio bound. `alphas[k]` is the
/// deviation allowed on `col_(k+2)`.
pub fn prop2_preconditions(
    params: &Params,
    t: u32,
    alphas: &[f64],
    beta: f64,
    form: TailExponent,
) -> bool {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    if t < 2 || alphas.len() != (t - 1) as usize || m + 2 > n || m < 1 || q > 1u64 << (n - 1) {
        return false;
    }
    // t <= 2^((m-1)/2) + 1  <=>  (t-1)^2 <= 2^(m-1)
    if Integer::from(t - 1).pow(2u32) > Integer::from(1) << (m - 1) as u32 {
        return false;
    }
    let Some(alphas) = alphas
        .iter()
        .map(|&a| Rational::from_f64(a))
        .collect::<Option<Vec<_>>>()
    else {
        return false;
    };
    let Some(beta) = Rational::from_f64(beta) else {
        return false;
    };
    let c1 = Rational::from(binom(q, 2)) * pow2(-(n - m)) + &alphas[0];
    if c1 > binom(1u64 << (m - 1), 2) {
        return false;
    }
    let ti = t as i64;
    let lead = Rational::from(Integer::from(q).pow(2u32) * 4u32) * pow2(-2 * n);
    let tail_num = Integer::from(2 * (q + t as u64 - 1)).pow(t + 1);
    let tail = Rational::from((tail_num, Integer::from(2 * t * (t + 1))))
        * pow2(-tail_exponent(n, m, ti, form));
    let mut sum = lead + tail;
    for (k, a) in alphas.iter().enumerate() {
        sum += weight(k as u32 + 1, m) * a;
    }
    if sum > Rational::from((1, 2)) {
        return false;
    }
    let need = Rational::from(binom(q, t + 1) * 2u32) * pow2(-ti * (n - m));
    beta >= need
}

/// Exact general-`t` ratio bound:
/// `4(1 + (2(t-1)/2^m + 2q/2^n)^(t-2)) x^2 + 2(1 + 4/2^m) alpha_1/2^m
///  + sum_{j=2}^{t-1} (1 + 2^j)(j-1)!/2^(jm) alpha_j + 2^t (t-1)!/2^(tm) beta`.
pub fn prop2_ratio_bound(params: &Params, t: u32, alphas: &[f64], beta: f64) -> Rational {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    assert_eq!(alphas.len(), (t - 1) as usize);
    let alphas: Vec<Rational> = alphas
        .iter()
        .map(|&a| Rational::from_f64(a).expect("finite alpha"))
        .collect();
    let beta = Rational::from_f64(beta).expect("finite beta");
    let x2 = Rational::from(Integer::from(q).pow(2u32)) * pow2(-(n + m));
    let inner = Rational::from(2 * (t as i64 - 1)) * pow2(-m) + Rational::from(2 * q) * pow2(-n);
    let mut out = (Rational::from(1) + inner.pow(t as i32 - 2)) * 4u32 * x2;
    out += (Rational::from(1) + pow2(2 - m)) * 2u32 * pow2(-m) * &alphas[0];
    for j in 2..t {
        let w = weight(j, m) * (Integer::from(1) + (Integer::from(1) << j));
        out += w * &alphas[(j - 1) as usize];
    }
    let tail = Rational::from(Integer::factorial(t - 1)) * pow2(t as i64 - t as i64 * m);
    out + tail * beta
}

/// Thresholds chosen for the `n/3 < m <= n - 4 - log2 n` argument, with
/// `t = ceil((n+m)/(n-m))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Params {
    pub t: u32,
    /// `alphas[k]` bounds the deviation of `col_(k+2)`, `k = 0..t-1`.
    pub alphas: Vec<Float>,
    pub beta: Float,
}

impl Theorem2Params {
    pub fn s_params(&self) -> crate::distinguish::SParams {
        crate::distinguish::SParams::new(
            self.t,
            self.alphas.iter().map(Float::to_f64).collect(),
            self.beta.to_f64(),
        )
        .expect("theorem-2 thresholds are positive")
    }
}

/// `t = ceil((n+m)/(n-m))`.
pub fn theorem2_t(n: u32, m: u32) -> u32 {
    (n + m).div_ceil(n - m)
}

pub fn theorem2_params(params: &Params) -> Result<Theorem2Params> {
    let (n, m, q) = (params.n(), params.m(), params.q());
    if !thm2_applies(n, m) {
        return Err(Error::Regime(format!(
            "needs n/3 < m <= n - 4 - log2 n, got n={n}, m={m}"
        )));
    }
    // 8q < 2^((n+m)/2)  <=>  64 q^2 < 2^(n+m)
    if Integer::from(q).pow(2u32) * 64u32 >= Integer::from(1) << (n + m) {
        return Err(Error::Regime(format!("needs q < 2^((n+m)/2)/8, got q={q}")));
    }
    let t = theorem2_t(n, m);
    let x = scaled_queries(params);
    let two_m = fl(m).exp2();
    let slack = fl(1) + fl(4) / &two_m;

    let mut alphas = Vec::with_capacity(t as usize - 1);
    alphas.push(fl(&two_m) / (fl(&slack) * 4u32).cbrt() * fl(&x).pow(fl(2) / 3u32));
    let y = fl(-(fl(3 * m as i64 - n as i64) / 2u32)).exp2() + &x;
    for j in 2..t {
        let fact = fl(Integer::from(Integer::factorial(j - 1)));
        let denom = (fl(1u64 << j) + 1u32) * 2u32 * fl(&fact).pow(2u32);
        let inner = fl(-(fl((j as i64 - 1) * (n as i64 - m as i64)))).exp2()
            * fl(&x).pow(j + 1)
            * fl(&y).pow(j - 1);
        alphas.push(fl(j * m).exp2() / denom.cbrt() * inner.cbrt());
    }
    let beta = fl(t * m).exp2() / fl(Integer::from(Integer::factorial(t - 1)))
        * (fl(q).pow(t + 1) / (fl(t * (t + 1)) * fl(t * (n + 1)).exp2())).sqrt();
    let out = Theorem2Params { t, alphas, beta };

    if let Some(failed) = second_case_preconditions(params, t)
        .into_iter()
        .find(|c| !c.holds)
    {
        return Err(Error::Regime(format!(
            "internal: parameter-lemma precondition `{}` fails at {params}",
            failed.name
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Precondition {
    pub name: &'static str,
    pub holds: bool,
}

/// Preconditions of the parameter-selection lemma for general `t`,
/// evaluated in 128-bit floats (they involve cube roots).
pub fn second_case_preconditions(params: &Params, t: u32) -> Vec<Precondition> {
    let (n, m, q) = (params.n() as i64, params.m() as i64, params.q());
    let mut out = Vec::new();
    let mut push = |name, holds| out.push(Precondition { name, holds });
    push("m <= n - 2", m + 2 <= n);
    push("q <= 2^(n-1)", n >= 1 && q <= 1u64 << (n - 1));
    let t_ok =
        t >= 2 && m >= 1 && Integer::from(t - 1).pow(2u32) <= (Integer::from(1) << (m - 1) as u32);
    push("2 <= t <= 2^((m-1)/2) + 1", t_ok);

    let x = scaled_queries(params);
    let ti = t as i64;
    let two_m = fl(m).exp2();
    let slack_cbrt = (fl(1) + fl(4) / &two_m).cbrt();
    let y = fl(-(fl(3 * m - n) / 2u32)).exp2() + &x;

    // 2^(-((n-m)/2)(t - (n+m)/(n-m))) (2x)^(t+1) <= t(t+1)/4
    let e = fl(-(fl((n - m) * ti - (n + m)) / 2u32)).exp2();
    let c1 = e * (fl(&x) * 2u32).pow(t + 1) <= fl(ti * (ti + 1)) / 4u32;
    push("tail <= t(t+1)/4", c1);

    let c2 = fl(&x).pow(2u32) + fl(&x).pow(fl(2) / 3u32) / &slack_cbrt / &two_m
        <= (fl(0.5) - fl(1) / &two_m) / 2u32;
    push("x^2 + ... <= (1/2)(1/2 - 1/2^m)", c2);

    let c3 = fl(4 * (ti - 2)) / fl(n - m).exp2() * &y * &x <= fl(0.125);
    push("4(t-2)/2^(n-m) (...) x <= 1/8", c3);

    // The `(n+m)/(n+m)` exponent in the fourth condition is read in the
    // parameter-lemma form, as for the other conditions.
    let tail = (fl(2 * (q + t as u64 - 1)) / (fl(n + m) / 2u32).exp2()).pow(t + 1)
        / (fl(2 * ti * (ti + 1)) * (fl((n - m) * ti - (n + m)) / 2u32).exp2());
    let c4 = fl(4) * (fl(q) / fl(n).exp2()).pow(2u32)
        + tail
        + fl(&x).pow(fl(2) / 3u32) / (fl(&slack_cbrt) * 2u32)
        + (fl(2) * &y / (fl(5) * fl(n - m).exp2())).cbrt() * &x
        <= 0.5;
    push("sum <= 1/2", c4);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, m: u32, q: u64) -> Params {
        Params::new(n, m, q).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn birthday_examples() {
        let b = birthday_bounds(&p(2, 0, 2));
        assert_eq!(b.upper.to_f64(), Some(0.25));
        let b = birthday_bounds(&p(10, 0, 32));
        assert_eq!(b.upper.to_f64(), Some(0.484375));
        let b = birthday_bounds(&p(10, 0, 1));
        assert_eq!(b.upper.to_f64(), Some(0.0));
        assert_eq!(b.lower.to_f64(), Some(0.0));
        assert!(!birthday_bounds(&p(10, 2, 5)).lower.is_applicable());
    }

    #[test]
    fn hall_examples() {
        assert_eq!(hall_value(14, 2, &fl(0)).to_f64(), 0.0);
        assert!(close(
            hall_bound(&p(14, 2, 256)).to_f64().unwrap(),
            5.5,
            1e-15
        ));
        // m > n/7: the cubic term carries a positive power of two.
        for q in [16u64, 64, 256] {
            let params = p(8, 4, q);
            let h = hall_bound(&params).to_f64().unwrap();
            assert!(h > stam_bound(&params).to_f64().unwrap());
        }
    }

    #[test]
    fn stam_examples() {
        assert!(close(
            stam_bound(&p(2, 1, 2)).to_f64().unwrap(),
            0.235702260395516,
            1e-14
        ));
        assert_eq!(stam_bound(&p(9, 3, 1)).to_f64(), Some(0.0));
        assert!(close(
            stam_bound(&p(4, 2, 4)).to_f64().unwrap(),
            0.5 * (36.0f64 / 195.0).sqrt(),
            1e-15
        ));
        assert!(close(
            stam_bound(&p(4, 2, 4)).to_f64().unwrap(),
            0.21483446221182984,
            1e-12
        ));
    }

    #[test]
    fn stam_simplified_dominates() {
        for (n, m, q) in [
            (2, 1, 2),
            (4, 2, 4),
            (10, 3, 100),
            (20, 10, 1 << 15),
            (8, 0, 256),
        ] {
            let params = p(n, m, q);
            assert!(
                stam_simplified_bound(&params).value().unwrap()
                    >= stam_bound(&params).value().unwrap()
            );
        }
    }

    #[test]
    fn thm1_examples() {
        assert!(close(
            thm1_value(&fl(0.25)).to_f64(),
            1.0 + (2.0 / 3.0f64).sqrt() / 4.0 + 0.0625,
            1e-14
        ));
        assert!(thm1_value(&fl(0.25)).to_f64() > 1.0);
        assert_eq!(thm1_value(&fl(0)).to_f64(), 0.0);
        // n=12, m=4, q=16: x = 1/16.
        let v = thm1_bound(&p(12, 4, 16)).to_f64().unwrap();
        let expect = 2f64.powf(-4.0 / 3.0) + (8.0f64 / 3.0).sqrt() / 64.0 + 1.0 / 256.0;
        assert!(close(v, expect, 1e-14));
        assert!(close(v, 0.426272, 1e-6));
        assert!(!thm1_bound(&p(2, 1, 2)).is_applicable());
    }

    #[test]
    fn thm2_examples() {
        assert_eq!(thm2_value(16, 8, &fl(0)).to_f64(), 0.0);
        let v = thm2_bound(&p(16, 8, 1 << 9)).to_f64().unwrap();
        assert!(close(v, 0.75 + 0.25 + 5.0 / 64.0 + 1.0 / 32.0, 1e-14));
        let v = thm2_bound(&p(16, 8, 1 << 6)).to_f64().unwrap();
        assert!(close(
            v,
            3.0 / 16.0 + 1.0 / 32.0 + 5.0 / 4096.0 + 1.0 / 2048.0,
            1e-14
        ));
        assert!(!thm2_bound(&p(16, 5, 10)).is_applicable());
        assert!(!thm2_bound(&p(16, 9, 10)).is_applicable());
    }

    #[test]
    fn regimes() {
        assert!(thm1_applies(12, 4) && !thm1_applies(12, 5));
        // n - 4 - log2 n: n=16 -> 8, n=13 -> 5.3, n=12 -> 4.4.
        assert!(thm2_applies(16, 8) && !thm2_applies(16, 9));
        assert!(thm2_applies(13, 5) && !thm2_applies(12, 5) && !thm2_applies(12, 4));
        assert!(thm2_applies(62, 40) && !thm2_applies(62, 53));
        // Exact boundary: n=32, m=23: 2^(5) = 32 >= 32.
        assert!(thm2_applies(32, 23) && !thm2_applies(32, 24));
    }

    #[test]
    fn theorem1_params_example() {
        let tp = theorem1_params(&p(30, 6, 1 << 14)).unwrap();
        let expect = 2f64.powf(6.0 - 2.0 / 3.0 - 8.0 / 3.0);
        assert!(close(tp.alpha.to_f64(), expect, 1e-12));
        assert!(close(tp.alpha.to_f64(), 6.3496, 1e-4));
        assert!(theorem1_params(&p(30, 5, 100)).is_err());
        // q = 2^((n+m)/2)/4 = 2^16 is excluded.
        assert!(theorem1_params(&p(30, 6, 1 << 16)).is_err());
        assert!(theorem1_params(&p(30, 6, (1 << 16) - 1)).is_ok());
    }

    #[test]
    fn theorem2_params_t() {
        assert_eq!(theorem2_t(16, 8), 3);
        assert_eq!(theorem2_t(15, 6), 3);
        assert_eq!(theorem2_t(40, 24), 4);
        let tp = theorem2_params(&p(16, 8, 100)).unwrap();
        assert_eq!(tp.t, 3);
        assert_eq!(tp.alphas.len(), 2);
        assert!(theorem2_params(&p(15, 5, 10)).is_err());
        // q < 2^((n+m)/2)/8 = 512 at n=16, m=8.
        assert!(theorem2_params(&p(16, 8, 512)).is_err());
    }

    #[test]
    fn q_half_birthday_m0() {
        let r = q_half_from_bound(BoundId::BirthdayUpper, 16, 0).unwrap();
        assert_eq!(r.first_uncertified, Some(257));
        assert_eq!(r.last_certified, Some(256));
    }

    #[test]
    fn q_half_not_applicable() {
        assert!(matches!(
            q_half_from_bound(BoundId::Thm1, 10, 5),
            Err(Error::Regime(_))
        ));
    }

    #[test]
    fn collision_q_half_values() {
        assert_eq!(collision_q_half(8), 20);
        assert_eq!(collision_q_half(16), 302);
    }

    #[test]
    fn bound_ids_round_trip() {
        for b in BoundId::ALL {
            assert_eq!(BoundId::parse(b.name()), Some(b));
        }
        assert_eq!(BoundId::parse("nope"), None);
    }

    #[test]
    fn tail_exponent_forms() {
        // The two readings differ by exactly m.
        assert_eq!(tail_exponent(16, 8, 3, TailExponent::ParameterLemma), 48);
        assert_eq!(tail_exponent(16, 8, 3, TailExponent::AsPrinted), 56);
    }
}
