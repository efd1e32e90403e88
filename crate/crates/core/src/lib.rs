//! Distinguishing a truncated random permutation from a random function.
//!
//! An oracle holds either a uniform permutation or a uniform function on
//! `n`-bit strings and answers each query with the top `n - m` bits of the
//! output. This crate computes the optimal distinguishing advantage exactly,
//! evaluates closed-form upper bounds on it, and estimates the advantage of
//! concrete distinguishers by Monte Carlo.

pub mod bounds;
pub mod distinguish;
pub mod error;
pub mod exact;
pub mod format;
pub mod oracle;
pub mod profile;
pub mod verify;

pub use error::{Error, Result};
pub use oracle::{Params, ReplySequence, World};
pub use profile::MultiplicityProfile;
