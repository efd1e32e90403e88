//! The two oracle worlds and reply sampling.
//!
//! A session lazily assigns outputs to queried inputs. In the permutation
//! world an output is drawn uniformly from the outputs not yet used, so
//! nothing proportional to `2^n` is ever materialized unless the query
//! budget itself is that large. Replies are the full `n`-bit output with
//! the low `m` bits dropped.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`). A generator is
//! identified by a `(seed, stream)` pair; batch sampling and the Monte Carlo
//! harness derive one stream per `(world, trial)` so results do not depend
//! on scheduling.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest supported domain bit-width.
pub const MAX_BITS: u32 = 62;

/// A problem instance: `n`-bit domain, `m` truncated bits, `q` queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Params {
    n: u32,
    m: u32,
    q: u64,
}

impl Params {
    pub fn new(n: u32, m: u32, q: u64) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::Params(format!("n = {n} must be in 1..={MAX_BITS}")));
        }
        if m >= n {
            return Err(Error::Params(format!("m = {m} must be below n = {n}")));
        }
        if q == 0 || q > 1u64 << n {
            return Err(Error::Params(format!("q = {q} must be in 1..=2^{n}")));
        }
        Ok(Self { n, m, q })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    /// Reply width `n - m`.
    pub fn reply_bits(&self) -> u32 {
        self.n - self.m
    }

    /// Number of distinct replies, `2^(n-m)`.
    pub fn alphabet_size(&self) -> u64 {
        1u64 << (self.n - self.m)
    }

    /// Number of full outputs sharing one reply, `2^m`.
    pub fn bucket_capacity(&self) -> u64 {
        1u64 << self.m
    }

    pub fn domain_size(&self) -> u64 {
        1u64 << self.n
    }

    /// Same `(n, m)` with a different budget.
    pub fn with_q(&self, q: u64) -> Result<Self> {
        Self::new(self.n, self.m, q)
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(n={}, m={}, q={})", self.n, self.m, self.q)
    }
}

/// The oracle's hidden choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum World {
    /// `c = 1`: a uniformly random permutation.
    Permutation,
    /// `c = 0`: a uniformly random function.
    Function,
}

impl World {
    pub const BOTH: [World; 2] = [World::Permutation, World::Function];

    pub(crate) fn stream_index(self) -> u64 {
        match self {
            World::Permutation => 0,
            World::Function => 1,
        }
    }
}

impl fmt::Display for World {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            World::Permutation => "permutation",
            World::Function => "function",
        })
    }
}

/// One element of `Omega`: the `q` truncated replies in query order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReplySequence {
    replies: Vec<u64>,
}

impl ReplySequence {
    /// Validates length and range against `params`.
    pub fn new(params: &Params, replies: Vec<u64>) -> Result<Self> {
        if replies.len() as u64 != params.q() {
            return Err(Error::Invalid(format!(
                "reply sequence has length {}, expected q = {}",
                replies.len(),
                params.q()
            )));
        }
        let a = params.alphabet_size();
        if let Some(bad) = replies.iter().find(|&&r| r >= a) {
            return Err(Error::Invalid(format!(
                "reply {bad} outside alphabet of size {a}"
            )));
        }
        Ok(Self { replies })
    }

    /// Unchecked constructor for sequences produced by this crate.
    pub(crate) fn from_raw(replies: Vec<u64>) -> Self {
        Self { replies }
    }

    pub fn replies(&self) -> &[u64] {
        &self.replies
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id used for trial `trial` in `world`.
pub fn trial_stream(world: World, trial: u64) -> u64 {
    trial
        .checked_mul(2)
        .and_then(|s| s.checked_add(world.stream_index()))
        .expect("trial index overflows stream id")
}

/// A live oracle with lazily sampled outputs.
#[derive(Debug, Clone)]
pub struct OracleSession {
    params: Params,
    world: World,
    assigned: HashMap<u64, u64>,
    used_outputs: HashSet<u64>,
    rng: ChaCha8Rng,
}

impl OracleSession {
    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn world(&self) -> World {
        self.world
    }

    /// Number of distinct inputs queried so far.
    pub fn distinct_queries(&self) -> u64 {
        self.assigned.len() as u64
    }

    /// Full (untruncated) output assigned to `w`, if queried.
    pub fn full_output(&self, w: u64) -> Option<u64> {
        self.assigned.get(&w).copied()
    }

    /// Reply to input `w`. Repeated inputs return the cached reply and do
    /// not consume budget.
    pub fn query(&mut self, w: u64) -> Result<u64> {
        let m = self.params.m();
        if w >= self.params.domain_size() {
            return Err(Error::Input {
                input: w,
                bits: self.params.n(),
            });
        }
        if let Some(&out) = self.assigned.get(&w) {
            return Ok(out >> m);
        }
        if self.distinct_queries() >= self.params.q() {
            return Err(Error::Budget {
                budget: self.params.q(),
            });
        }
        let out = match self.world {
            World::Function => self.rng.gen_range(0..self.params.domain_size()),
            World::Permutation => self.fresh_output(),
        };
        self.assigned.insert(w, out);
        Ok(out >> m)
    }

    fn fresh_output(&mut self) -> u64 {
        let domain = self.params.domain_size();
        let used = self.used_outputs.len() as u64;
        debug_assert!(used < domain);
        let out = if used <= domain / 2 {
            // At most half the domain is taken: < 2 expected draws.
            loop {
                let c = self.rng.gen_range(0..domain);
                if !self.used_outputs.contains(&c) {
                    break c;
                }
            }
        } else {
            // Dense regime (domain < 2q): pick the k-th unused output.
            let mut k = self.rng.gen_range(0..domain - used);
            let mut found = None;
            for c in 0..domain {
                if self.used_outputs.contains(&c) {
                    continue;
                }
                if k == 0 {
                    found = Some(c);
                    break;
                }
                k -= 1;
            }
            found.expect("an unused output exists while budget remains")
        };
        self.used_outputs.insert(out);
        out
    }
}

/// Fresh session; a deterministic function of `(params, world, seed)`.
pub fn open_session(params: &Params, world: World, seed: u64) -> OracleSession {
    session_with_rng(params, world, stream_rng(seed, 0))
}

pub(crate) fn session_with_rng(params: &Params, world: World, rng: ChaCha8Rng) -> OracleSession {
    OracleSession {
        params: *params,
        world,
        assigned: HashMap::new(),
        used_outputs: HashSet::new(),
        rng,
    }
}

/// Replies to the canonical distinct queries `0, 1, ..., q-1`.
///
/// Both worlds are invariant under relabeling inputs, so any `q` distinct
/// queries give the same reply distribution; an adaptive adversary querying
/// distinct inputs sees exactly this distribution as well.
pub fn sample_reply_sequence(params: &Params, world: World, seed: u64) -> ReplySequence {
    sample_with_rng(params, world, stream_rng(seed, 0))
}

pub(crate) fn sample_with_rng(params: &Params, world: World, rng: ChaCha8Rng) -> ReplySequence {
    let domain = params.domain_size();
    if world == World::Permutation && domain <= (1 << 16).max(64 * params.q()) {
        return sample_dense_permutation(params, rng);
    }
    let mut session = session_with_rng(params, world, rng);
    let replies = (0..params.q())
        .map(|w| {
            session
                .query(w)
                .expect("canonical queries stay within budget")
        })
        .collect();
    ReplySequence::from_raw(replies)
}

/// Bitset-backed variant of the session's permutation sampling for small
/// domains. Consumes the generator identically, so it returns exactly what
/// a session would.
fn sample_dense_permutation(params: &Params, mut rng: ChaCha8Rng) -> ReplySequence {
    let domain = params.domain_size();
    let mut used = vec![0u64; domain.div_ceil(64) as usize];
    let is_used = |used: &[u64], c: u64| used[(c / 64) as usize] >> (c % 64) & 1 == 1;
    let mut replies = Vec::with_capacity(params.q() as usize);
    for taken in 0..params.q() {
        let out = if taken <= domain / 2 {
            loop {
                let c = rng.gen_range(0..domain);
                if !is_used(&used, c) {
                    break c;
                }
            }
        } else {
            let mut k = rng.gen_range(0..domain - taken);
            let mut c = 0;
            loop {
                if !is_used(&used, c) {
                    if k == 0 {
                        break c;
                    }
                    k -= 1;
                }
                c += 1;
            }
        };
        used[(out / 64) as usize] |= 1 << (out % 64);
        replies.push(out >> params.m());
    }
    ReplySequence::from_raw(replies)
}
