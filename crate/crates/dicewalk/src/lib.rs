//! Exact hitting-time statistics for dice-sum walks.
//!
//! Roll a (possibly loaded) die, add the outcomes to a running sum, and stop
//! as soon as the sum lands in a chosen class of integers — primes, products
//! of `k` distinct primes, perfect squares. This crate computes the
//! distribution, moments, and tail behavior of that process **exactly**:
//! every probability after `k` rolls is an integer over `W^k` (`W` the die's
//! total weight), so the per-round survivor and inductee polynomials are
//! carried as big-integer coefficient vectors and every reported statistic is
//! an exact rational rendered to any requested precision.
//!
//! The flow mirrors the round recurrence: the survivor polynomial is
//! convolved with the die's probability generating function, the terms whose
//! exponents satisfy the predicate split off as that round's hit mass, and
//! exact accumulators track the raw moments of duration and final location.
//!
//! ```
//! use dicewalk::engine::{run, GameSpec, StopRule};
//! use dicewalk::polyring::DieSpec;
//! use dicewalk::predicates::PredicateSpec;
//! use dicewalk::stats::summarize;
//!
//! let spec = GameSpec::new(
//!     DieSpec::fair(6)?,
//!     PredicateSpec::Prime,
//!     0,
//!     StopRule::FixedRounds(200),
//! )?;
//! let summary = summarize(&run(&spec)?, 20)?;
//! assert_eq!(summary.render().mean_duration, "2.4284979136935041712");
//! # Ok::<(), dicewalk::Error>(())
//! ```
//!
//! Two reference backends cross-check the exact engine: a floating-point
//! dynamic program ([`engine::dp_reference`]) and a seeded Monte Carlo
//! simulation ([`montecarlo::simulate`]).

pub mod cli;
pub mod engine;
pub mod error;
pub mod montecarlo;
pub mod polyring;
pub mod predicates;
pub mod stats;

pub use error::{Error, Result};
