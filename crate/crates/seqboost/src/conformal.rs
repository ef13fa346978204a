//! Sequential testing of exchangeability via conformal p-values and boosted
//! power-betting martingales.
//!
//! A nonconformity measure maps `(x_1..x_t)` to scores `(z_1..z_t)`
//! equivariantly under permutations. The tie-randomized conformal p-value
//!
//! ```text
//!     p_t = (#{i <= t: z_i > z_t} + theta_t * #{i <= t: z_i = z_t}) / t
//! ```
//!
//! is i.i.d. uniform on `[0,1]` under exchangeability, so the conformal
//! martingale `M_t = prod f_i(p_i)` with betting functions integrating to
//! one is a test martingale **with respect to the p-value filtration** (not
//! the observation filtration), and boosting applies with the uniform as
//! the known null law of `p_t`.
//!
//! For the power bet `f^k(u) = k u^(k-1)` the truncated expectation is
//! available in closed form, giving a one-dimensional boosting equation
//! solved by bisection.
//!
//! Tie-break uniforms come from a dedicated, seed-addressed stream separate
//! from data generation, so p-values are reproducible given data and seed.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{ProcessState, StepRule};
use crate::solver::{BoostMethod, BoostResult, GUARD_TOL};
use crate::sprt::{RunOptions, StepLog, TestOutcome};

/// Maps observation prefixes to nonconformity scores, equivariantly under
/// permutations: permuting the inputs permutes the outputs the same way.
pub trait NonconformityMeasure: Send + Sync {
    fn scores(&self, xs: &[f64]) -> Vec<f64>;
}

/// Default measure: `z_i = |x_i - mean(x_j, j != i)|`, the distance to the
/// leave-one-out mean. Parameter-free and sensitive to mean shifts; the
/// single-observation score is 0 by convention.
#[derive(Debug, Clone, Copy, Default)]
pub struct DistanceToLooMean;

impl NonconformityMeasure for DistanceToLooMean {
    fn scores(&self, xs: &[f64]) -> Vec<f64> {
        let t = xs.len();
        if t <= 1 {
            return vec![0.0; t];
        }
        let sum: f64 = xs.iter().sum();
        xs.iter().map(|&x| (x - (sum - x) / (t as f64 - 1.0)).abs()).collect()
    }
}

/// Tie-randomized conformal p-value of the last score in `scores`.
pub fn conformal_p(scores: &[f64], tie_break: f64) -> Result<f64> {
    let t = scores.len();
    if t == 0 {
        return Err(Error::domain("conformal_p requires at least one score".to_string()));
    }
    if !(0.0..=1.0).contains(&tie_break) {
        return Err(Error::domain(format!("tie break must be in [0,1], got {tie_break}")));
    }
    let z_t = scores[t - 1];
    let mut greater = 0u64;
    let mut equal = 0u64;
    for &z in scores {
        if z > z_t {
            greater += 1;
        } else if z == z_t {
            equal += 1;
        }
    }
    Ok((greater as f64 + tie_break * equal as f64) / t as f64)
}

/// Power betting function `f^k(u) = k u^(k-1)`, `k` in `(0,1)`; integrates
/// to one on `[0,1]`. `u = 0` maps to `+inf` (handled by truncation
/// downstream, never a run-halting error).
pub fn power_bet(u: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must be in (0,1), got {kappa}")));
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!("p-value must be in [0,1], got {u}")));
    }
    if u == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(kappa * u.powf(kappa - 1.0))
}

/// `E[T_alpha(b f^k(U); M)]` for `U` uniform: with `c = 1/(alpha M)` and
/// `u* = (c/(b k))^(1/(k-1))` clipped to `[0,1]`, the cap binds exactly on
/// `{U < u*}`, so the expectation is `b (1 - u*^k) + c u*`.
fn power_bet_truncated_expectation(b: f64, kappa: f64, wealth: f64, alpha: f64) -> f64 {
    let c = 1.0 / (alpha * wealth);
    let u_star = (c / (b * kappa)).powf(1.0 / (kappa - 1.0)).min(1.0);
    b * (1.0 - u_star.powf(kappa)) + c * u_star
}

/// Boosting factor for the power bet: the root of the truncated-expectation
/// equation, nonincreasing in `kappa` and nondecreasing in the wealth.
pub fn solve_conformal_boost(kappa: f64, wealth: f64, alpha: f64, tol: f64) -> Result<BoostResult> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::domain(format!("kappa must be in (0,1), got {kappa}")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    if !(wealth > 0.0 && wealth < 1.0 / alpha) {
        return Err(Error::domain(format!("wealth must lie in (0, 1/alpha), got {wealth}")));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    let eval = |b: f64| power_bet_truncated_expectation(b, kappa, wealth, alpha);
    let mut iterations = 0u32;
    let mut lo = 1.0f64;
    if eval(lo) >= 1.0 {
        return Ok(BoostResult {
            b: 1.0,
            verified_expectation: eval(1.0),
            iterations,
            method: BoostMethod::RootBisection,
        });
    }
    let mut hi = 2.0f64;
    while eval(hi) <= 1.0 {
        lo = hi;
        hi *= 2.0;
        iterations += 1;
        if iterations > 64 {
            break;
        }
    }
    while hi - lo > tol * lo.max(1.0) && iterations < 200 {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if eval(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let verified = eval(lo);
    if verified > 1.0 + GUARD_TOL {
        return Ok(BoostResult {
            b: 1.0,
            verified_expectation: eval(1.0),
            iterations,
            method: BoostMethod::FallbackOne,
        });
    }
    Ok(BoostResult { b: lo, verified_expectation: verified, iterations, method: BoostMethod::RootBisection })
}

/// Configuration of a conformal run: constant betting parameter and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalConfig {
    pub kappa: f64,
    pub alpha: f64,
}

impl ConformalConfig {
    pub fn new(kappa: f64, alpha: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::domain(format!("kappa must be in (0,1), got {kappa}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
        }
        Ok(ConformalConfig { kappa, alpha })
    }
}

/// Boosted conformal exchangeability test with a predictable
/// `kappa_at(t)` schedule. `tie_rng` supplies the tie-break uniforms.
pub fn run_conformal_boosted_with_schedule(
    observations: impl IntoIterator<Item = f64>,
    measure: &dyn NonconformityMeasure,
    kappa_at: &dyn Fn(u64) -> f64,
    alpha: f64,
    tie_rng: &mut dyn RngCore,
    options: &RunOptions,
) -> Result<TestOutcome> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    let rule = StepRule::power_one(alpha);
    let mut state = ProcessState::new();
    let mut xs: Vec<f64> = Vec::new();
    let mut used = 0u64;
    let mut guard_fallbacks = 0u64;
    let mut max_verified = f64::NEG_INFINITY;
    let mut steps: Option<Vec<StepLog>> = if options.log_steps { Some(Vec::new()) } else { None };

    for x in observations {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        used += 1;
        xs.push(x);
        let scores = measure.scores(&xs);
        let theta: f64 = rand::Rng::random(tie_rng);
        let p = conformal_p(&scores, theta)?;
        let kappa = kappa_at(used);
        let raw = power_bet(p, kappa)?;
        state.advance_raw(raw);

        let b = if options.with_boost && state.wealth > 0.0 && state.wealth < 1.0 / alpha {
            let r = solve_conformal_boost(kappa, state.wealth, alpha, crate::solver::DEFAULT_TOL)?;
            if r.method == BoostMethod::FallbackOne {
                guard_fallbacks += 1;
            }
            if r.verified_expectation > max_verified {
                max_verified = r.verified_expectation;
            }
            r.b
        } else {
            1.0
        };
        let candidate = if raw == 0.0 { 0.0 } else { b * raw };
        state.step_candidate(candidate, &rule)?;
        if let Some(log) = steps.as_mut() {
            log.push(StepLog {
                t: state.t,
                raw_factor: raw,
                b,
                b_inv: None,
                nu: None,
                nu_inv: None,
                wealth: state.wealth,
                raw_wealth: state.raw_wealth,
            });
        }
    }
    let decision = match state.status {
        crate::process::Status::RejectNull => crate::sprt::Decision::RejectNull,
        crate::process::Status::Continue => crate::sprt::Decision::UndecidedAtCap,
        _ => crate::sprt::Decision::AcceptNull,
    };
    Ok(TestOutcome {
        decision,
        stopping_time: if state.status.is_stopped() { Some(state.t) } else { None },
        samples_used: used,
        raw_lr_at_stop: state.raw_wealth,
        boosted_wealth_at_stop: state.wealth,
        guard_fallbacks,
        max_verified_expectation: max_verified,
        steps,
    })
}

/// Boosted conformal exchangeability test with a constant `kappa`.
pub fn run_conformal_boosted(
    observations: impl IntoIterator<Item = f64>,
    measure: &dyn NonconformityMeasure,
    config: &ConformalConfig,
    tie_rng: &mut dyn RngCore,
    options: &RunOptions,
) -> Result<TestOutcome> {
    run_conformal_boosted_with_schedule(
        observations,
        measure,
        &|_| config.kappa,
        config.alpha,
        tie_rng,
        options,
    )
}
