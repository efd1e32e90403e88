//! Parsing of numeric axis arguments such as `1..6,8,10`.

use std::fmt::Display;
use std::str::FromStr;

/// Parses a comma-separated list of values and inclusive `a..b` ranges,
/// keeping the given order. Duplicates are dropped after their first use.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>, String>
where
    T: FromStr + Copy + PartialOrd + PartialEq + Display + Step,
    T::Err: Display,
{
    let mut out: Vec<T> = Vec::new();
    for item in s.split(',').map(str::trim) {
        if item.is_empty() {
            return Err(format!("empty item in `{s}`"));
        }
        let values = match item.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let (a, b) = (parse_one::<T>(a)?, parse_one::<T>(b)?);
                if a > b {
                    return Err(format!("range `{item}` is empty"));
                }
                let mut v = vec![a];
                let mut x = a;
                while x < b {
                    x = x.succ();
                    v.push(x);
                }
                v
            }
            None => vec![parse_one::<T>(item)?],
        };
        for v in values {
            if !out.contains(&v) {
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn parse_one<T>(s: &str) -> Result<T, String>
where
    T: FromStr,
    T::Err: Display,
{
    s.trim().parse().map_err(|e| format!("`{s}`: {e}"))
}

/// A parsed axis. Wrapped so clap treats it as a single value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct List<T>(pub Vec<T>);

pub fn u32_list(s: &str) -> Result<List<u32>, String> {
    parse_list(s).map(List)
}

pub fn u64_list(s: &str) -> Result<List<u64>, String> {
    parse_list(s).map(List)
}

pub fn pow2_axis(s: &str) -> Result<List<u64>, String> {
    pow2_list(s).map(List)
}

/// Integers that can be stepped by one.
pub trait Step {
    fn succ(self) -> Self;
}

impl Step for u32 {
    fn succ(self) -> Self {
        self + 1
    }
}

impl Step for u64 {
    fn succ(self) -> Self {
        self + 1
    }
}

/// `2^a, ..., 2^b` from an exponent list.
pub fn pow2_list(s: &str) -> Result<Vec<u64>, String> {
    parse_list::<u32>(s)?
        .into_iter()
        .map(|k| {
            1u64.checked_shl(k)
                .filter(|_| k < 64)
                .ok_or_else(|| format!("2^{k} overflows"))
        })
        .collect()
}
