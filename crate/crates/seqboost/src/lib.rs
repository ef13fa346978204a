//! Sequential hypothesis tests that never overshoot the rejection threshold.
//!
//! A test supermartingale `(M_t)` rejects the null when it reaches `1/α`;
//! Ville's inequality then bounds the type-I error by `α`. In practice the
//! process jumps *past* `1/α` at the stopping time, and that overshoot is
//! pure waste: the test could have rejected earlier with the same guarantee.
//!
//! This crate removes the overshoot by *sequential boosting*: at each step
//! the next multiplicative factor `L_t` is scaled by the largest `b_t ≥ 1`
//! such that the truncated factor still has null expectation at most one,
//!
//! ```text
//!     E_0[ T_α(b_t · L_t ; M_{t-1}) | F_{t-1} ] ≤ 1,
//! ```
//!
//! where `T_α(x; M)` caps the candidate wealth at `1/α` (and, in the
//! two-sided variant `T_α(x; M, ν)`, zeroes it at or below a futility level
//! `ν`). The boosted process stops no later than the original one and holds
//! the same anytime-valid error control.
//!
//! The crate covers:
//!
//! - [`process`]: truncation functions and the stateful boosted stepper;
//! - [`models`]: factor oracles (Gaussian and Bernoulli likelihood ratios,
//!   predictable plugins) with closed-form truncated expectations;
//! - [`solver`]: boosting-factor solvers: scalar root finding, the
//!   largest-feasible rule for discrete factors, the closed-form binary
//!   boost, and the coupled forward/inverse system for joint type-I/II
//!   control;
//! - [`sprt`]: runnable sequential tests: boosted power-one and two-sided
//!   SPRTs, predictable plugins, randomized futility, and the Wald /
//!   Siegmund baselines;
//! - [`confseq`]: Robbins-style confidence sequences for a unit-variance
//!   Gaussian mean and their boosted tightening;
//! - [`wor`]: betting tests for a binary population mean under sampling
//!   without replacement, with closed-form boosting;
//! - [`conformal`]: exchangeability testing via conformal p-values and
//!   boosted power bets;
//! - [`simkit`]: a seeded, parallel Monte Carlo harness with
//!   importance-sampled type-I estimation and CSV emission.

pub mod confseq;
pub mod conformal;
pub mod error;
pub mod models;
pub mod normal;
pub mod process;
pub mod simkit;
pub mod solver;
pub mod sprt;
pub mod wor;

pub use error::{Error, Result};
pub use models::{BernoulliLr, DiscreteFactorModel, FactorAtom, FactorModel, GaussianLr};
pub use process::{Level, ProcessState, Status, StopDecision};
pub use solver::{BoostMethod, BoostResult, CoupledBoostResult};
