//! Robust microbenchmarking for hostile environments.
//!
//! Short workloads are hard to time honestly: the clock itself has limited
//! precision and accuracy, and the operating system only ever makes code
//! slower, never faster, producing skewed, multimodal, drifting timing
//! distributions that defeat textbook statistics. This crate packages a
//! benchmarking workflow built around three ideas:
//!
//! 1. **Calibrate the timer** ([`timer`]) and derive `j`, the ratio of
//!    timer accuracy to precision — the largest useful number of
//!    back-to-back executions per measurement.
//! 2. **Tune once, cache, and reuse** ([`oracle`], [`tuning`]): a ramp of
//!    measurements estimates the workload's minimum time, and an oracle
//!    function maps that estimate to the executions-per-measurement count
//!    that amortizes timer error without wasting budget.
//! 3. **Report minima and compare minima** ([`analysis`]): under one-sided
//!    noise the sample minimum carries the least error and is the most
//!    stable location estimate across trials; a configurable threshold on
//!    the ratio of minima (30% by default) decides regressions.
//!
//! A seedable simulator of the underlying noise model ([`model`]) makes
//! every statistical claim in the test suite checkable against exact
//! expectations, and the [`cli`] module wires everything into the `rbench`
//! binary (`calibrate` / `tune` / `run` / `compare` / `simulate` /
//! `oracle --check`).
//!
//! ```
//! use rbench::model::{SyntheticProgram, DelayFactor, TimerErrorModel, simulate_trial};
//! use rbench::analysis::location_estimates;
//!
//! // A 100 ns workload disturbed by a 10 ns delay firing half the time.
//! let program = SyntheticProgram::new(2, 100)?;
//! let cache_miss = DelayFactor::uniform(10, 0.5)?;
//! let trial = simulate_trial(&program, &[cache_miss], 4, &TimerErrorModel::None, 1000, 7, 0)?;
//!
//! let samples: Vec<f64> = trial.per_exec_samples().collect();
//! let estimates = location_estimates(&samples, trial.n_execs())?;
//! assert!(estimates.min_ns >= 100.0);        // delays only ever add time
//! assert!(estimates.min_ns <= estimates.mean_ns);
//! # Ok::<(), rbench::Error>(())
//! ```

pub mod analysis;
pub mod cli;
pub mod error;
pub mod model;
pub mod oracle;
pub mod report;
pub mod runner;
pub mod suite;
pub mod timer;
pub mod tuning;
pub mod workloads;

pub use error::{Error, Result};

// The guide's code blocks compile and run as doctests, keeping the book in
// sync with the library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/calibration.md")]
    mod calibration {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/oracle.md")]
    mod oracle {}
    #[doc = include_str!("../../../book/src/tuning.md")]
    mod tuning {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
