//! ClipAudit: a ballot-polling risk-limiting audit.
//!
//! Ballots are drawn uniformly without replacement. For every reported
//! (winner, loser) pair the audit keeps the counts `a` and `b` of sampled
//! votes for each side and accepts the pair once
//!
//! ```text
//! a - b > beta * sqrt(a + b)
//! ```
//!
//! The stopping constant `beta(n, alpha)` is calibrated so that in an exactly
//! tied contest of `n` ballots the rule fires with probability `alpha`. The
//! [`beta`] module computes it by Monte Carlo simulation of tied random walks,
//! by exhaustive enumeration for small `n`, by closed-form approximation, or
//! by lookup in the published reference table.
//!
//! Module map:
//!
//! * [`types`]: shared domain values (contests, ballots, tallies).
//! * [`beta`]: the stopping constant.
//! * [`engine`]: the sequential audit state machine.
//! * [`live`]: an audit driven by the sampler's announced draws.
//! * [`sampler`]: seeded draws without replacement, manifests, synthetic profiles.
//! * [`estimator`]: expected and simulated sample sizes.
//! * [`normal`]: the standard-normal inverse survival function.
//! * [`rng`]: the pinned pseudo-random generator and seed derivation.

pub mod beta;
pub mod engine;
mod error;
pub mod estimator;
pub mod live;
pub mod normal;
pub mod rng;
pub mod sampler;
pub mod types;

pub use error::{Error, Result};
