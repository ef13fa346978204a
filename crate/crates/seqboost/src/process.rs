//! Truncation functions and the stateful boosted-supermartingale stepper.
//!
//! The one-sided truncation caps a candidate factor so the wealth can reach
//! `1/alpha` but never exceed it:
//!
//! ```text
//!     T_a(x; M)    = x        if M*x <= 1/a
//!                  = 1/(M*a)  otherwise.
//! ```
//!
//! The two-sided extension additionally zeroes the wealth at or below a
//! futility level `nu`:
//!
//! ```text
//!     T_a(x; M, v) = 0        if M*x <= v
//!                  = x        if v < M*x <= 1/a
//!                  = 1/(M*a)  otherwise,
//! ```
//!
//! so `T_a(x; M, 0) = T_a(x; M)`. Both are nondecreasing and left-continuous
//! in `x`, and `M * T_a(x; M, v) <= 1/a` for every `x` in `[0, +inf]`.
//!
//! Equality conventions: `M*x = 1/a` counts as a rejection and `M*x = v` as a
//! futility stop. At rejection the wealth is clamped to exactly `1/a`, which
//! makes the no-overshoot invariant exact in floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desired error levels. `beta = 0` means a power-one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub alpha: f64,
    pub beta: f64,
}

impl Level {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must be in [0,1), got {beta}")));
        }
        if alpha + beta >= 1.0 {
            return Err(Error::domain(format!(
                "alpha + beta must be below 1, got {alpha} + {beta}"
            )));
        }
        Ok(Level { alpha, beta })
    }

    /// Power-one configuration (`beta = 0`).
    pub fn power_one(alpha: f64) -> Result<Self> {
        Level::new(alpha, 0.0)
    }

    /// Rejection threshold `1/alpha`.
    pub fn rejection_threshold(&self) -> f64 {
        1.0 / self.alpha
    }
}

/// Which branch of the truncation function a candidate fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationBranch {
    /// `M*x <= nu`: the factor is zeroed (futility).
    Futile,
    /// `nu < M*x <= 1/alpha`: the factor passes unchanged.
    Pass,
    /// `M*x > 1/alpha`: the factor is capped at `1/(M*alpha)`.
    Capped,
}

fn check_truncation_args(m: f64, alpha: f64) -> Result<()> {
    if !(m > 0.0) || !m.is_finite() {
        return Err(Error::domain(format!("wealth M must be positive and finite, got {m}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    Ok(())
}

/// One-sided truncation `T_a(x; M)`. `x = +inf` maps to the cap `1/(M*a)`.
pub fn truncate_one_sided(x: f64, m: f64, alpha: f64) -> Result<f64> {
    truncate_two_sided(x, m, 0.0, alpha)
}

/// Two-sided truncation `T_a(x; M, nu)`; reduces to the one-sided function
/// at `nu = 0`.
pub fn truncate_two_sided(x: f64, m: f64, nu: f64, alpha: f64) -> Result<f64> {
    Ok(truncate_with_branch(x, m, nu, alpha)?.0)
}

/// Truncation with the branch taken, used by the stepper to make stopping
/// decisions exact.
pub fn truncate_with_branch(x: f64, m: f64, nu: f64, alpha: f64) -> Result<(f64, TruncationBranch)> {
    check_truncation_args(m, alpha)?;
    if x < 0.0 || x.is_nan() {
        return Err(Error::domain(format!("factor must be nonnegative, got {x}")));
    }
    let cap = 1.0 / alpha;
    if !(0.0..=cap).contains(&nu) {
        return Err(Error::domain(format!(
            "futility level nu must lie in [0, 1/alpha] = [0, {cap}], got {nu}"
        )));
    }
    // Compare on the candidate wealth scale; `0 * inf` cannot arise because
    // m > 0 is enforced above.
    let candidate = m * x;
    if candidate <= nu {
        Ok((0.0, TruncationBranch::Futile))
    } else if candidate <= cap {
        Ok((x, TruncationBranch::Pass))
    } else {
        Ok((1.0 / (m * alpha), TruncationBranch::Capped))
    }
}

/// Stop status of a boosted process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Continue,
    RejectNull,
    AcceptNull,
    /// Futility branch taken on a discrete two-sided path with randomized
    /// futility enabled; resolution is deferred to the randomization draw.
    AcceptPendingRandomization,
}

impl Status {
    pub fn is_stopped(&self) -> bool {
        !matches!(self, Status::Continue)
    }
}

/// Terminal summary of a stopped process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub status: Status,
    pub stopping_time: Option<u64>,
    pub terminal_wealth: f64,
}

/// Stopping policy applied by [`ProcessState::step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRule {
    pub alpha: f64,
    /// Futility level for this step (`0` disables futility stops).
    pub nu: f64,
    /// Two-sided processes accept at the futility branch; power-one
    /// processes continue with zero wealth.
    pub two_sided: bool,
    /// Defer the futility decision to external randomization.
    pub randomized_futility: bool,
}

impl StepRule {
    pub fn power_one(alpha: f64) -> Self {
        StepRule { alpha, nu: 0.0, two_sided: false, randomized_futility: false }
    }

    pub fn two_sided(alpha: f64, nu: f64) -> Self {
        StepRule { alpha, nu, two_sided: true, randomized_futility: false }
    }
}

/// The current boosted supermartingale.
///
/// `wealth` is the boosted process `M_t`; `raw_wealth` is the unboosted,
/// untruncated factor product `Λ_t`, kept for importance sampling. The
/// cumulative boost products track the predictable thresholds of the
/// two-sided system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessState {
    pub t: u64,
    pub wealth: f64,
    pub raw_wealth: f64,
    pub boost_cumprod: f64,
    pub inv_boost_cumprod: f64,
    pub status: Status,
}

impl Default for ProcessState {
    fn default() -> Self {
        ProcessState::new()
    }
}

impl ProcessState {
    /// Fresh process at `t = 0` with unit wealth.
    pub fn new() -> Self {
        ProcessState {
            t: 0,
            wealth: 1.0,
            raw_wealth: 1.0,
            boost_cumprod: 1.0,
            inv_boost_cumprod: 1.0,
            status: Status::Continue,
        }
    }

    /// Advance by one already-truncated factor.
    ///
    /// The factor must come from [`truncate_one_sided`] / [`truncate_two_sided`]
    /// evaluated at the current wealth. Prefer [`ProcessState::step_candidate`]
    /// inside runners: it truncates internally and lands the capped branch on
    /// exactly `1/alpha`.
    pub fn step(&mut self, truncated_factor: f64, rule: &StepRule) -> Result<()> {
        if self.status.is_stopped() {
            return Err(Error::usage("cannot step a stopped process"));
        }
        if truncated_factor < 0.0 || truncated_factor.is_nan() {
            return Err(Error::domain(format!(
                "truncated factor must be nonnegative, got {truncated_factor}"
            )));
        }
        let threshold = 1.0 / rule.alpha;
        let next = self.wealth * truncated_factor;
        self.t += 1;
        if next >= threshold {
            self.wealth = threshold;
            self.status = Status::RejectNull;
        } else if next <= rule.nu && rule.two_sided {
            // Truncated factors only land at or below nu via the futile
            // branch, i.e. next == 0.
            self.wealth = next;
            self.status = if rule.randomized_futility {
                Status::AcceptPendingRandomization
            } else {
                Status::AcceptNull
            };
        } else {
            self.wealth = next;
        }
        Ok(())
    }

    /// Advance by a raw boosted candidate `b_t * L_t`: truncates against the
    /// current wealth, multiplies, and resolves the stop status from the
    /// truncation branch (exact at the cap).
    pub fn step_candidate(&mut self, candidate: f64, rule: &StepRule) -> Result<TruncationBranch> {
        if self.status.is_stopped() {
            return Err(Error::usage("cannot step a stopped process"));
        }
        let (factor, branch) = truncate_with_branch(candidate, self.wealth, rule.nu, rule.alpha)?;
        let threshold = 1.0 / rule.alpha;
        self.t += 1;
        match branch {
            TruncationBranch::Capped => {
                self.wealth = threshold;
                self.status = Status::RejectNull;
            }
            TruncationBranch::Futile => {
                self.wealth = 0.0;
                if rule.two_sided {
                    self.status = if rule.randomized_futility {
                        Status::AcceptPendingRandomization
                    } else {
                        Status::AcceptNull
                    };
                }
            }
            TruncationBranch::Pass => {
                let next = self.wealth * factor;
                if next >= threshold {
                    self.wealth = threshold;
                    self.status = Status::RejectNull;
                } else {
                    self.wealth = next;
                }
            }
        }
        Ok(branch)
    }

    /// Multiply the raw (unboosted) factor product.
    pub fn advance_raw(&mut self, raw_factor: f64) {
        self.raw_wealth *= raw_factor;
    }

    pub fn decision(&self) -> StopDecision {
        StopDecision {
            status: self.status,
            stopping_time: if self.status.is_stopped() { Some(self.t) } else { None },
            terminal_wealth: self.wealth,
        }
    }
}
