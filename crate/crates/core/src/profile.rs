//! Multiplicity profiles, collision counts and profile enumeration.
//!
//! The profile of a reply sequence is the multiset of multiplicities of its
//! distinct symbols, sorted non-increasing. Both worlds' likelihoods and every
//! `col_j` depend on a sequence only through its profile, so sums over
//! `Omega` (size `A^q`) collapse into sums over integer partitions of `q`.

use std::fmt;

use rug::ops::Pow;
use rug::{Complete, Integer, Rational};

use crate::error::{Error, Result};
use crate::oracle::{Params, ReplySequence};

/// Default cap on the number of profiles an enumeration may visit.
pub const DEFAULT_PROFILE_LIMIT: u128 = 10_000_000;

/// Non-increasing positive multiplicities `d_1 >= d_2 >= ... >= d_l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiplicityProfile {
    parts: Vec<u64>,
}

impl MultiplicityProfile {
    pub fn new(mut parts: Vec<u64>) -> Result<Self> {
        if parts.contains(&0) {
            return Err(Error::Invalid("profile parts must be positive".into()));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { parts })
    }

    pub(crate) fn from_sorted(parts: Vec<u64>) -> Self {
        debug_assert!(parts.windows(2).all(|w| w[0] >= w[1]));
        Self { parts }
    }

    pub fn parts(&self) -> &[u64] {
        &self.parts
    }

    /// Number of distinct symbols `l`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Sum of the parts, i.e. the sequence length.
    pub fn total(&self) -> u64 {
        self.parts.iter().sum()
    }

    pub fn largest(&self) -> u64 {
        self.parts.first().copied().unwrap_or(0)
    }

    /// Whether some symbol occurs more often than a truncation bucket allows.
    pub fn exceeds_bucket(&self, params: &Params) -> bool {
        self.largest() > params.bucket_capacity()
    }

    /// Run-length multiplicities: how many parts share each distinct value.
    pub(crate) fn part_multiplicities(&self) -> impl Iterator<Item = u64> + '_ {
        let mut i = 0;
        std::iter::from_fn(move || {
            if i >= self.parts.len() {
                return None;
            }
            let v = self.parts[i];
            let start = i;
            while i < self.parts.len() && self.parts[i] == v {
                i += 1;
            }
            Some((i - start) as u64)
        })
    }
}

impl fmt::Display for MultiplicityProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, d) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str(")")
    }
}

/// Profile of a reply sequence.
pub fn profile_of(omega: &ReplySequence) -> MultiplicityProfile {
    profile_of_slice(omega.replies())
}

pub(crate) fn profile_of_slice(replies: &[u64]) -> MultiplicityProfile {
    let mut sorted = replies.to_vec();
    sorted.sort_unstable();
    let mut parts = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut k = i + 1;
        while k < sorted.len() && sorted[k] == sorted[i] {
            k += 1;
        }
        parts.push((k - i) as u64);
        i = k;
    }
    parts.sort_unstable_by(|a, b| b.cmp(a));
    MultiplicityProfile::from_sorted(parts)
}

/// `col_j = sum_k C(d_k, j)`.
pub fn col_j(profile: &MultiplicityProfile, j: u32) -> Integer {
    assert!(j >= 2, "col_j is defined for j >= 2");
    let mut acc = Integer::new();
    for &d in profile.parts() {
        if d < j as u64 {
            break;
        }
        acc += Integer::from(d).binomial(j);
    }
    acc
}

/// `col_2 .. col_jmax` of one profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollisionVector {
    col: Vec<Integer>,
}

impl CollisionVector {
    pub fn of(profile: &MultiplicityProfile, j_max: u32) -> Self {
        Self {
            col: (2..=j_max.max(2)).map(|j| col_j(profile, j)).collect(),
        }
    }

    pub fn j_max(&self) -> u32 {
        self.col.len() as u32 + 1
    }

    /// `col_j`, zero beyond the stored range.
    pub fn get(&self, j: u32) -> Integer {
        assert!(j >= 2);
        self.col.get((j - 2) as usize).cloned().unwrap_or_default()
    }
}

/// `E_f col_j = C(q, j) / 2^((j-1)(n-m))`.
pub fn expected_col(params: &Params, j: u32) -> Rational {
    assert!(j >= 2);
    let num = Integer::from(params.q()).binomial(j);
    let shift = (j - 1) * params.reply_bits();
    Rational::from((num, Integer::from(1) << shift))
}

/// Upper bound on `Var_f col_j`:
/// `C(j,2) C(q,j) 2^(-(j-1)(n-m)) (1 + q/2^(n-m))^(j-2)`.
pub fn variance_bound_col(params: &Params, j: u32) -> Rational {
    assert!(j >= 2);
    let mean = expected_col(params, j);
    let growth = Rational::from(1) + Rational::from((params.q(), params.alphabet_size()));
    let growth = growth.pow(j as i32 - 2);
    let pairs = Integer::from(j).binomial(2);
    mean * growth * pairs
}

/// A profile together with the number of sequences in `Omega` having it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfileWeight {
    pub profile: MultiplicityProfile,
    pub count: Integer,
}

/// Integer partitions of `total` into at most `max_parts` parts, each at most
/// `max_part`, in lexicographically decreasing order.
#[derive(Debug, Clone)]
pub struct Partitions {
    parts: Vec<u64>,
    max_parts: u64,
    started: bool,
    done: bool,
}

impl Partitions {
    pub fn new(total: u64, max_parts: u64, max_part: u64) -> Self {
        let max_part = max_part.min(total);
        let feasible = total == 0
            || (max_part > 0
                && max_parts > 0
                && (max_part as u128) * (max_parts as u128) >= total as u128);
        let mut parts = Vec::new();
        if feasible {
            let mut rem = total;
            while rem > 0 {
                let d = rem.min(max_part);
                parts.push(d);
                rem -= d;
            }
        }
        Self {
            parts,
            max_parts,
            started: false,
            done: !feasible,
        }
    }

    fn advance(&mut self) -> bool {
        // Find the rightmost part that can be lowered by one while the rest
        // still fits below it in the remaining slots.
        let mut tail = 0u64;
        let mut i = self.parts.len();
        while i > 0 {
            i -= 1;
            let v = self.parts[i];
            tail += v;
            if v <= 1 {
                continue;
            }
            let new_v = v - 1;
            let rem = tail - new_v;
            let slots = self.max_parts - (i as u64 + 1);
            if (rem as u128) <= (new_v as u128) * (slots as u128) {
                self.parts.truncate(i);
                self.parts.push(new_v);
                let mut r = rem;
                while r > 0 {
                    let d = r.min(new_v);
                    self.parts.push(d);
                    r -= d;
                }
                return true;
            }
        }
        false
    }
}

impl Iterator for Partitions {
    type Item = MultiplicityProfile;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        if self.started {
            if !self.advance() {
                self.done = true;
                return None;
            }
        } else {
            self.started = true;
        }
        Some(MultiplicityProfile::from_sorted(self.parts.clone()))
    }
}

/// Number of partitions of `total` with parts at most `max_part` (saturating).
fn partitions_bounded_part(total: u64, max_part: u64) -> u128 {
    let total = total as usize;
    let mut ways = vec![0u128; total + 1];
    ways[0] = 1;
    for v in 1..=(max_part as usize).min(total) {
        for s in v..=total {
            ways[s] = ways[s].saturating_add(ways[s - v]);
        }
    }
    ways[total]
}

/// Upper-bound estimate of the number of profiles an enumeration visits:
/// the smaller of the part-size-restricted and part-count-restricted
/// partition counts. Exact when only one restriction binds.
pub fn estimate_profile_count(params: &Params, cap_parts_at_bucket: bool) -> u128 {
    let q = params.q();
    let (max_parts, max_part) = enumeration_bounds(params, cap_parts_at_bucket);
    let max_part = max_part.min(q);
    let k = max_part.min(max_parts);
    // Guard the quadratic DP itself on absurd inputs.
    if (q as u128) * (k as u128) > 2_000_000_000 {
        return u128::MAX;
    }
    partitions_bounded_part(q, max_part).min(partitions_bounded_part(q, max_parts))
}

fn enumeration_bounds(params: &Params, cap_parts_at_bucket: bool) -> (u64, u64) {
    let q = params.q();
    let max_parts = q.min(params.alphabet_size());
    let max_part = if cap_parts_at_bucket {
        params.bucket_capacity().min(q)
    } else {
        q
    };
    (max_parts, max_part)
}

/// Computes `count(profile) = A!/((A-l)! prod_j m_j!) * q!/prod_k d_k!` from
/// precomputed factorial tables.
#[derive(Debug, Clone)]
pub struct ProfileCounter {
    factorial: Vec<Integer>,
    alphabet_falling: Vec<Integer>,
    q: u64,
}

impl ProfileCounter {
    pub fn new(params: &Params) -> Self {
        let q = params.q();
        let mut factorial = Vec::with_capacity(q as usize + 1);
        factorial.push(Integer::from(1));
        for i in 1..=q {
            let next = &factorial[i as usize - 1] * Integer::from(i);
            factorial.push(next);
        }
        let a = Integer::from(params.alphabet_size());
        let max_l = q.min(params.alphabet_size());
        let mut alphabet_falling = Vec::with_capacity(max_l as usize + 1);
        alphabet_falling.push(Integer::from(1));
        for l in 1..=max_l {
            let next = &alphabet_falling[l as usize - 1] * (&a - Integer::from(l - 1));
            alphabet_falling.push(next);
        }
        Self {
            factorial,
            alphabet_falling,
            q,
        }
    }

    pub fn count(&self, profile: &MultiplicityProfile) -> Integer {
        debug_assert_eq!(profile.total(), self.q);
        let l = profile.len();
        let mut num = (&self.alphabet_falling[l] * &self.factorial[self.q as usize]).complete();
        let mut den = Integer::from(1);
        for &d in profile.parts() {
            den *= &self.factorial[d as usize];
        }
        for mult in profile.part_multiplicities() {
            den *= &self.factorial[mult as usize];
        }
        num.div_exact_mut(&den);
        num
    }
}

/// Stream of profiles with exact sequence counts.
#[derive(Debug, Clone)]
pub struct ProfileStream {
    partitions: Partitions,
    counter: ProfileCounter,
}

impl Iterator for ProfileStream {
    type Item = ProfileWeight;

    fn next(&mut self) -> Option<ProfileWeight> {
        let profile = self.partitions.next()?;
        let count = self.counter.count(&profile);
        Some(ProfileWeight { profile, count })
    }
}

/// Profiles of `Omega` with at most `min(q, A)` parts; with
/// `cap_parts_at_bucket` each part is also at most `2^m` (the permutation
/// world's support).
pub fn enumerate_profiles(params: &Params, cap_parts_at_bucket: bool) -> Result<ProfileStream> {
    enumerate_profiles_limited(params, cap_parts_at_bucket, DEFAULT_PROFILE_LIMIT)
}

pub fn enumerate_profiles_limited(
    params: &Params,
    cap_parts_at_bucket: bool,
    limit: u128,
) -> Result<ProfileStream> {
    let partitions = profile_partitions(params, cap_parts_at_bucket, limit)?;
    Ok(ProfileStream {
        partitions,
        counter: ProfileCounter::new(params),
    })
}

/// Bare partition stream after the size check, without counts.
pub(crate) fn profile_partitions(
    params: &Params,
    cap_parts_at_bucket: bool,
    limit: u128,
) -> Result<Partitions> {
    let estimate = estimate_profile_count(params, cap_parts_at_bucket);
    if estimate > limit {
        return Err(Error::Size {
            what: "estimated profile count",
            estimate,
            limit,
        });
    }
    let (max_parts, max_part) = enumeration_bounds(params, cap_parts_at_bucket);
    Ok(Partitions::new(params.q(), max_parts, max_part))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32, m: u32, q: u64) -> Params {
        Params::new(n, m, q).unwrap()
    }

    fn prof(parts: &[u64]) -> MultiplicityProfile {
        MultiplicityProfile::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn profile_examples() {
        let params = p(3, 1, 4);
        let w = ReplySequence::new(&params, vec![0, 1, 0, 1]).unwrap();
        assert_eq!(profile_of(&w).parts(), &[2, 2]);
        let params = p(3, 1, 3);
        let w = ReplySequence::new(&params, vec![3, 3, 3]).unwrap();
        assert_eq!(profile_of(&w).parts(), &[3]);
        let w = ReplySequence::new(&params, vec![2, 0, 1]).unwrap();
        assert_eq!(profile_of(&w).parts(), &[1, 1, 1]);
    }

    #[test]
    fn col_examples() {
        assert_eq!(col_j(&prof(&[2, 2]), 2), 2);
        assert_eq!(col_j(&prof(&[3]), 2), 3);
        assert_eq!(col_j(&prof(&[3]), 3), 1);
        for j in 2..6 {
            assert_eq!(col_j(&prof(&[1, 1, 1, 1]), j), 0);
        }
        let cv = CollisionVector::of(&prof(&[4, 2, 1]), 5);
        assert_eq!(cv.get(2), 7);
        assert_eq!(cv.get(4), 1);
        assert_eq!(cv.get(5), 0);
        assert_eq!(cv.get(9), 0);
    }

    #[test]
    fn expected_col_examples() {
        // n-m = 1, q = 2, j = 2.
        assert_eq!(expected_col(&p(2, 1, 2), 2), Rational::from((1, 2)));
        // n-m = 2, q = 3, j = 3.
        assert_eq!(expected_col(&p(3, 1, 3), 3), Rational::from((1, 16)));
        assert_eq!(expected_col(&p(3, 1, 2), 3), 0);
    }

    #[test]
    fn variance_bound_examples() {
        assert_eq!(variance_bound_col(&p(2, 1, 2), 2), Rational::from((1, 2)));
        assert_eq!(variance_bound_col(&p(3, 1, 4), 3), Rational::from((3, 2)));
        assert_eq!(variance_bound_col(&p(3, 1, 2), 3), 0);
    }

    #[test]
    fn zero_part_rejected() {
        assert!(MultiplicityProfile::new(vec![2, 0]).is_err());
        assert_eq!(prof(&[1, 3, 2]).parts(), &[3, 2, 1]);
    }

    #[test]
    fn enumerate_small_uncapped() {
        let got: Vec<_> = enumerate_profiles(&p(2, 1, 2), false)
            .unwrap()
            .map(|w| (w.profile.parts().to_vec(), w.count))
            .collect();
        assert_eq!(
            got,
            vec![(vec![2], Integer::from(2)), (vec![1, 1], Integer::from(2))]
        );
    }

    #[test]
    fn enumerate_capped_bucket() {
        let got: Vec<_> = enumerate_profiles(&p(2, 1, 4), true).unwrap().collect();
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].profile.parts(), &[2, 2]);
        assert_eq!(got[0].count, 6);
    }

    #[test]
    fn counts_sum_to_omega() {
        for (n, m, q) in [(3, 1, 3), (4, 1, 6), (5, 3, 7), (6, 2, 12), (4, 2, 10)] {
            let params = p(n, m, q);
            let total: Integer = enumerate_profiles(&params, false)
                .unwrap()
                .map(|w| w.count)
                .sum();
            let omega = Integer::from(params.alphabet_size()).pow(q as u32);
            assert_eq!(total, omega, "{params}");
        }
    }

    #[test]
    fn partition_counts() {
        // p(10) = 42, p(20) = 627.
        assert_eq!(Partitions::new(10, 10, 10).count(), 42);
        assert_eq!(Partitions::new(20, 20, 20).count(), 627);
        // Partitions of 10 into at most 3 parts: 14; parts at most 3: 14.
        assert_eq!(Partitions::new(10, 3, 10).count(), 14);
        assert_eq!(Partitions::new(10, 10, 3).count(), 14);
        // Boxed: 3 parts each at most 3 summing to 5: (3,2),(3,1,1),(2,2,1).
        assert_eq!(Partitions::new(5, 3, 3).count(), 3);
        assert_eq!(Partitions::new(10, 2, 4).count(), 0);
    }

    #[test]
    fn partitions_strictly_decreasing_lex() {
        let all: Vec<_> = Partitions::new(12, 5, 6).collect();
        for w in all.windows(2) {
            assert!(w[0].parts() > w[1].parts());
        }
        for part in &all {
            assert_eq!(part.total(), 12);
            assert!(part.len() <= 5 && part.largest() <= 6);
        }
    }

    #[test]
    fn estimate_matches_when_one_side_binds() {
        assert_eq!(estimate_profile_count(&p(10, 2, 20), false), 627);
        assert_eq!(
            estimate_profile_count(&p(8, 2, 64), true),
            Partitions::new(64, 64, 4).count() as u128
        );
    }

    #[test]
    fn size_error() {
        let err = enumerate_profiles_limited(&p(10, 0, 100), false, 1000).unwrap_err();
        assert!(matches!(err, Error::Size { .. }));
    }

    #[test]
    fn part_multiplicities_runs() {
        let v: Vec<_> = prof(&[3, 3, 2, 1, 1, 1]).part_multiplicities().collect();
        assert_eq!(v, vec![2, 1, 3]);
    }
}
