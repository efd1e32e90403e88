//! Text renderings of exact and floating values for tables.

use rug::ops::Pow;
use rug::{Integer, Rational};

/// Significant digits used by [`decimal`].
pub const DECIMAL_DIGITS: u32 = 30;

/// `p/q` in lowest terms (`p` alone when `q = 1`).
pub fn rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `r` rounded half-up to [`DECIMAL_DIGITS`] significant digits, computed
/// exactly. Magnitudes below `1e-6` use scientific notation.
pub fn decimal(r: &Rational) -> String {
    decimal_digits(r, DECIMAL_DIGITS)
}

pub fn decimal_digits(r: &Rational, digits: u32) -> String {
    assert!(digits >= 1);
    if *r == 0 {
        return "0".into();
    }
    let sign = if *r < 0 { "-" } else { "" };
    let x = Rational::from(r.abs_ref());

    // Find e with 10^e <= x < 10^(e+1), starting from the float estimate.
    let mut e = x.to_f64().log10().floor() as i64;
    loop {
        if x < pow10(e) {
            e -= 1;
        } else if x >= pow10(e + 1) {
            e += 1;
        } else {
            break;
        }
    }
    let mut mantissa = round_half_up(&(&x / pow10(e + 1 - digits as i64)));
    if mantissa == Integer::from(10).pow(digits) {
        mantissa /= 10;
        e += 1;
    }
    let text = mantissa.to_string();
    debug_assert_eq!(text.len(), digits as usize);

    if e < -6 {
        let (head, tail) = text.split_at(1);
        let tail = tail.trim_end_matches('0');
        let body = if tail.is_empty() {
            head.to_string()
        } else {
            format!("{head}.{tail}")
        };
        return format!("{sign}{body}e{e}");
    }
    let body = if e < 0 {
        format!("0.{}{}", "0".repeat((-e - 1) as usize), text)
    } else if e + 1 >= digits as i64 {
        format!("{}{}", text, "0".repeat((e + 1 - digits as i64) as usize))
    } else {
        let (int, frac) = text.split_at((e + 1) as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{}", trim_fraction(&body))
}

/// Shortest round-trip rendering, scientific outside `[1e-4, 1e16)`.
pub fn float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn pow10(e: i64) -> Rational {
    let p = Integer::from(10).pow(e.unsigned_abs() as u32);
    if e >= 0 {
        Rational::from(p)
    } else {
        Rational::from((Integer::from(1), p))
    }
}

fn round_half_up(x: &Rational) -> Integer {
    let twice = Rational::from(x * 2u32) + 1u32;
    let (num, den) = twice.into_numer_denom();
    num / (den * 2u32)
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
