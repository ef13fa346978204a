//! Runnable sequential tests: boosted power-one and two-sided SPRTs,
//! predictable plugins, randomized futility for discrete data, and the
//! Wald / Siegmund baselines.
//!
//! All boosted runners share the same skeleton: per observation, solve for
//! the boosting factor(s) at the current wealth, truncate the boosted
//! candidate, and advance the process. The raw (unboosted, untruncated)
//! likelihood-ratio product is tracked on every run solely so the
//! importance-sampling identity `P_0(tau < inf) = E_1[1{tau<inf} / L_tau]`
//! can be evaluated from the stopped value; the boosted wealth is never
//! substituted into that estimator.
//!
//! A run is strictly sequential (the boosting factors are predictable);
//! distinct runs are independent and can execute in parallel.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{truncated_expectation_two_sided, FactorModel, GaussianLr, PluginSchedule};
use crate::process::{Level, ProcessState, Status, StepRule};
use crate::solver::{solve_boost_coupled, solve_boost_one_sided, solve_largest, BoostMethod, NuSpec, DEFAULT_TOL};

/// Terminal decision of a sequential test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    RejectNull,
    AcceptNull,
    /// The observation budget ran out before either boundary was reached.
    UndecidedAtCap,
}

/// One step of a boosted run, recorded when step logging is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub t: u64,
    pub raw_factor: f64,
    pub b: f64,
    pub b_inv: Option<f64>,
    pub nu: Option<f64>,
    pub nu_inv: Option<f64>,
    pub wealth: f64,
    pub raw_wealth: f64,
}

/// Outcome of one sequential test run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub decision: Decision,
    /// Time of the decision; `None` when undecided at the cap.
    pub stopping_time: Option<u64>,
    pub samples_used: u64,
    /// Raw likelihood-ratio product at the stop (importance sampling).
    pub raw_lr_at_stop: f64,
    pub boosted_wealth_at_stop: f64,
    /// Number of per-step solves that fell back to `b = 1`.
    pub guard_fallbacks: u64,
    /// Largest plugged-back expectation accepted during the run.
    pub max_verified_expectation: f64,
    /// Per-step log, present when requested.
    pub steps: Option<Vec<StepLog>>,
}

impl TestOutcome {
    fn from_state(
        state: &ProcessState,
        samples_used: u64,
        guard_fallbacks: u64,
        max_verified: f64,
        steps: Option<Vec<StepLog>>,
    ) -> Self {
        let decision = match state.status {
            Status::RejectNull => Decision::RejectNull,
            Status::AcceptNull | Status::AcceptPendingRandomization => Decision::AcceptNull,
            Status::Continue => Decision::UndecidedAtCap,
        };
        TestOutcome {
            decision,
            stopping_time: if state.status.is_stopped() { Some(state.t) } else { None },
            samples_used,
            raw_lr_at_stop: state.raw_wealth,
            boosted_wealth_at_stop: state.wealth,
            guard_fallbacks,
            max_verified_expectation: max_verified,
            steps,
        }
    }
}

/// Common run controls. The default observation cap matches the simulation
/// horizon used throughout (10000 samples); an exhausted cap yields
/// [`Decision::UndecidedAtCap`], never a coerced acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub max_samples: u64,
    pub log_steps: bool,
    /// Disable to run the underlying test with all boosting factors forced
    /// to one (paired comparisons).
    pub with_boost: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { max_samples: 10_000, log_steps: false, with_boost: true }
    }
}

impl RunOptions {
    pub fn with_max_samples(max_samples: u64) -> Self {
        RunOptions { max_samples, ..Default::default() }
    }
}

/// Test family selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestMode {
    PowerOne,
    TwoSidedFixedNu,
    TwoSidedCoupled,
    WaldApprox,
    WaldConservative,
    Siegmund,
}

/// Thresholds and futility policy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub mode: TestMode,
    pub level: Level,
    /// Predictable futility level `nu^M` for the raw martingale in
    /// `TwoSidedFixedNu` mode; the boosted threshold is the coupled
    /// `nu_t = min(nu^M prod b_i, 1/alpha)`.
    pub nu_m: f64,
    /// Mean shift `mu1` entering Siegmund's threshold correction.
    pub mean_shift: f64,
    pub randomized_futility: bool,
}

impl StopRule {
    pub fn power_one(alpha: f64) -> Result<Self> {
        Ok(StopRule {
            mode: TestMode::PowerOne,
            level: Level::power_one(alpha)?,
            nu_m: 0.0,
            mean_shift: 0.0,
            randomized_futility: false,
        })
    }

    /// Baseline thresholds `(gamma0, gamma1)` for the raw likelihood ratio.
    pub fn thresholds(&self) -> Result<(f64, f64)> {
        let Level { alpha, beta } = self.level;
        match self.mode {
            TestMode::PowerOne => Ok((0.0, 1.0 / alpha)),
            TestMode::WaldApprox => Ok((beta / (1.0 - alpha), (1.0 - beta) / alpha)),
            TestMode::WaldConservative => Ok((beta, 1.0 / alpha)),
            TestMode::Siegmund => {
                // rho corrects for the expected overshoot of the Gaussian
                // random walk at the boundary.
                const RHO: f64 = 0.583;
                let corr = (self.mean_shift * RHO).exp();
                Ok((beta * corr / (1.0 - alpha), (1.0 - beta) / (alpha * corr)))
            }
            TestMode::TwoSidedFixedNu | TestMode::TwoSidedCoupled => Err(Error::usage(
                "boosted modes have predictable per-step thresholds, not fixed ones",
            )),
        }
    }
}

struct StepAccounting {
    guard_fallbacks: u64,
    max_verified: f64,
    steps: Option<Vec<StepLog>>,
}

impl StepAccounting {
    fn new(log: bool) -> Self {
        StepAccounting {
            guard_fallbacks: 0,
            max_verified: f64::NEG_INFINITY,
            steps: if log { Some(Vec::new()) } else { None },
        }
    }

    fn absorb(&mut self, method: BoostMethod, verified: f64) {
        if method == BoostMethod::FallbackOne {
            self.guard_fallbacks += 1;
        }
        if verified > self.max_verified {
            self.max_verified = verified;
        }
    }

    fn log(&mut self, entry: StepLog) {
        if let Some(steps) = self.steps.as_mut() {
            steps.push(entry);
        }
    }
}

// ---------------------------------------------------------------------------
// Power-one runs
// ---------------------------------------------------------------------------

/// Boosted power-one SPRT: solve the one-sided boost at each step, truncate,
/// and stop when the wealth reaches `1/alpha`.
pub fn run_power_one_boosted(
    observations: impl IntoIterator<Item = f64>,
    model: &dyn FactorModel,
    alpha: f64,
    options: &RunOptions,
) -> Result<TestOutcome> {
    let level = Level::power_one(alpha)?;
    let rule = StepRule::power_one(level.alpha);
    let mut state = ProcessState::new();
    let mut acct = StepAccounting::new(options.log_steps);
    let mut used = 0u64;

    for x in observations {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        used += 1;
        let raw = model.factor(x);
        state.advance_raw(raw);
        let b = if !options.with_boost || state.wealth <= 0.0 {
            // Zero wealth is absorbing for a multiplicative process; no
            // boost is defined there.
            1.0
        } else {
            let r = solve_boost_one_sided(model, state.wealth, alpha, DEFAULT_TOL)?;
            acct.absorb(r.method, r.verified_expectation);
            r.b
        };
        if state.wealth <= 0.0 {
            state.t += 1;
        } else {
            let candidate = if raw == 0.0 { 0.0 } else { b * raw };
            state.step_candidate(candidate, &rule)?;
        }
        acct.log(StepLog {
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
    Ok(TestOutcome::from_state(&state, used, acct.guard_fallbacks, acct.max_verified, acct.steps))
}

/// Boosted power-one SPRT with a predictable plugin alternative for
/// unit-variance Gaussian data: at step `t` the alternative parameter
/// `theta_t` is computed from the data strictly before `t` and fed into the
/// Gaussian boost machinery as the mean difference `theta_t - theta0`.
pub fn run_power_one_plugin(
    observations: impl IntoIterator<Item = f64>,
    plugin: PluginSchedule,
    theta0: f64,
    alpha: f64,
    options: &RunOptions,
) -> Result<TestOutcome> {
    let level = Level::power_one(alpha)?;
    let rule = StepRule::power_one(level.alpha);
    let mut state = ProcessState::new();
    let mut acct = StepAccounting::new(options.log_steps);
    let mut used = 0u64;
    let mut prefix_sum = 0.0;

    for x in observations {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        used += 1;
        let theta_t = plugin.theta(used, prefix_sum, theta0)?;
        let delta_t = theta_t - theta0;
        prefix_sum += x;

        // A degenerate alternative (theta_t = theta0) gives lambda = 1
        // identically; the factor is one and the largest valid boost is one.
        if delta_t <= 1e-12 {
            state.t += 1;
            acct.log(StepLog {
                t: state.t,
                raw_factor: 1.0,
                b: 1.0,
                b_inv: None,
                nu: None,
                nu_inv: None,
                wealth: state.wealth,
                raw_wealth: state.raw_wealth,
            });
            continue;
        }
        let model_t = GaussianLr::new(theta0, delta_t)?;
        let raw = model_t.lr(x);
        state.advance_raw(raw);
        let b = if options.with_boost && state.wealth > 0.0 {
            let r = solve_boost_one_sided(&model_t, state.wealth, alpha, DEFAULT_TOL)?;
            acct.absorb(r.method, r.verified_expectation);
            r.b
        } else {
            1.0
        };
        state.step_candidate(b * raw, &rule)?;
        acct.log(StepLog {
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
    Ok(TestOutcome::from_state(&state, used, acct.guard_fallbacks, acct.max_verified, acct.steps))
}

// ---------------------------------------------------------------------------
// Two-sided runs
// ---------------------------------------------------------------------------

/// Boosted two-sided SPRT with joint type I/II control: maintains the
/// forward and inverse boosted processes, solves the coupled system each
/// step, rejects at forward wealth `1/alpha` and accepts when the forward
/// wealth is zeroed at the futility threshold (equivalently, when the
/// boosted inverse process rejects).
pub fn run_two_sided_boosted(
    observations: impl IntoIterator<Item = f64>,
    model: &dyn FactorModel,
    alpha: f64,
    beta: f64,
    options: &RunOptions,
) -> Result<TestOutcome> {
    let level = Level::new(alpha, beta)?;
    if level.beta == 0.0 {
        return Err(Error::domain("two-sided runs require beta > 0".to_string()));
    }
    let mut state = ProcessState::new();
    let mut acct = StepAccounting::new(options.log_steps);
    let mut used = 0u64;

    for x in observations {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        used += 1;
        let raw = model.factor(x);

        // While the run continues, neither process has hit a truncation
        // branch, so the inverse wealth is the product prod(b_inv) / L_{t-1}
        // up to rounding; clamp it into the solver's open domain.
        let inv_wealth = (state.inv_boost_cumprod / state.raw_wealth)
            .clamp(1e-300, (1.0 / beta) * (1.0 - 1e-12));

        let (b, b_inv, nu, nu_inv) = if options.with_boost {
            let r = solve_boost_coupled(
                model,
                state.wealth,
                inv_wealth,
                alpha,
                beta,
                state.boost_cumprod,
                state.inv_boost_cumprod,
                DEFAULT_TOL,
            )?;
            let method =
                if r.fallback { BoostMethod::FallbackOne } else { BoostMethod::CoupledConstrained };
            acct.absorb(method, r.verified_forward.max(r.verified_inverse));
            (r.b, r.b_inv, r.nu, r.nu_inv)
        } else {
            let prod = state.boost_cumprod * state.inv_boost_cumprod;
            (1.0, 1.0, (beta * prod).min(1.0 / alpha), (alpha * prod).min(1.0 / beta))
        };

        state.advance_raw(raw);
        state.boost_cumprod *= b;
        state.inv_boost_cumprod *= b_inv;
        let rule = StepRule::two_sided(alpha, nu);
        let candidate = if raw == 0.0 { 0.0 } else { b * raw };
        state.step_candidate(candidate, &rule)?;

        acct.log(StepLog {
            t: state.t,
            raw_factor: raw,
            b,
            b_inv: Some(b_inv),
            nu: Some(nu),
            nu_inv: Some(nu_inv),
            wealth: state.wealth,
            raw_wealth: state.raw_wealth,
        });
    }
    Ok(TestOutcome::from_state(&state, used, acct.guard_fallbacks, acct.max_verified, acct.steps))
}

/// Result of the randomized futility resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomizedFutility {
    pub a: f64,
    /// Rejection threshold `alpha * a * M_{t-1}` compared against the
    /// uniform draw.
    pub threshold: f64,
    pub decision: Decision,
}

/// Randomized resolution of a discrete futility stop: with the largest
/// feasible `b*` leaving slack `1 - E_0[T] > 0`, rejecting when
/// `U <= alpha * a_t * M_{t-1}` with
///
/// ```text
///     a_t = (1 - E_0[T_alpha(b* L; M, nu)]) / P_0(b* L M <= nu)
/// ```
///
/// preserves type-I control by the randomized Ville inequality.
pub fn randomized_futility_accept(
    wealth_before: f64,
    model: &dyn FactorModel,
    b_star: f64,
    nu: f64,
    alpha: f64,
    uniform_draw: f64,
) -> Result<RandomizedFutility> {
    if !(0.0..=1.0).contains(&uniform_draw) {
        return Err(Error::domain(format!("uniform draw must be in [0,1], got {uniform_draw}")));
    }
    let atoms = model
        .atoms()
        .ok_or_else(|| Error::usage("randomized futility applies to discrete models only"))?;
    let expectation = truncated_expectation_two_sided(model, b_star, wealth_before, nu, alpha)?;
    let futility_prob: f64 = atoms
        .iter()
        .filter(|a| b_star * a.value * wealth_before <= nu)
        .map(|a| a.p_null)
        .sum();
    if futility_prob <= 0.0 {
        return Err(Error::usage(
            "futility branch has null probability zero; the branch is unreachable",
        ));
    }
    let a = (1.0 - expectation) / futility_prob;
    let threshold = alpha * a * wealth_before;
    // a_t = 0 (expectation already one) never rejects.
    let decision = if threshold > 0.0 && uniform_draw <= threshold {
        Decision::RejectNull
    } else {
        Decision::AcceptNull
    };
    Ok(RandomizedFutility { a, threshold, decision })
}

/// Boosted two-sided run with a user-supplied predictable futility level
/// `nu^M` for the raw martingale, coupled into the boosted threshold
/// `nu_t = min(nu^M prod b_i, 1/alpha)`, which preserves the pathwise
/// dominance over the raw two-sided rule. For discrete models the futility
/// branch can optionally be resolved by randomization (`futility_rng`).
pub fn run_two_sided_fixed_nu(
    observations: impl IntoIterator<Item = f64>,
    model: &dyn FactorModel,
    alpha: f64,
    nu_m: f64,
    options: &RunOptions,
    mut futility_rng: Option<&mut dyn RngCore>,
) -> Result<TestOutcome> {
    let level = Level::power_one(alpha)?;
    if !(0.0..=1.0 / alpha).contains(&nu_m) {
        return Err(Error::domain(format!("nu_m must lie in [0, 1/alpha], got {nu_m}")));
    }
    let randomized = futility_rng.is_some();
    let mut state = ProcessState::new();
    let mut acct = StepAccounting::new(options.log_steps);
    let mut used = 0u64;

    for x in observations {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        used += 1;
        let raw = model.factor(x);

        let b = if options.with_boost {
            let r = solve_largest(
                model,
                state.wealth,
                level.alpha,
                NuSpec::ProportionalToB { coeff: nu_m * state.boost_cumprod },
                DEFAULT_TOL,
            )?;
            acct.absorb(r.method, r.verified_expectation);
            r.b
        } else {
            1.0
        };
        let nu = (nu_m * state.boost_cumprod * b).min(1.0 / alpha);
        state.advance_raw(raw);
        state.boost_cumprod *= b;

        let rule = StepRule { alpha, nu, two_sided: true, randomized_futility: randomized };
        let wealth_before = state.wealth;
        let candidate = if raw == 0.0 { 0.0 } else { b * raw };
        state.step_candidate(candidate, &rule)?;

        if state.status == Status::AcceptPendingRandomization {
            let rng = futility_rng.as_deref_mut().expect("randomized flag implies rng");
            let u: f64 = rand::Rng::random(rng);
            let resolved = randomized_futility_accept(wealth_before, model, b, nu, alpha, u)?;
            state.status = match resolved.decision {
                Decision::RejectNull => Status::RejectNull,
                _ => Status::AcceptNull,
            };
            if state.status == Status::RejectNull {
                state.wealth = 1.0 / alpha;
            }
        }

        acct.log(StepLog {
            t: state.t,
            raw_factor: raw,
            b,
            b_inv: None,
            nu: Some(nu),
            nu_inv: None,
            wealth: state.wealth,
            raw_wealth: state.raw_wealth,
        });
    }
    Ok(TestOutcome::from_state(&state, used, acct.guard_fallbacks, acct.max_verified, acct.steps))
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

/// Raw likelihood-ratio test against fixed thresholds: the unboosted
/// power-one SPRT, Wald's approximate and conservative two-sided SPRTs, and
/// Siegmund's corrected thresholds.
pub fn run_baseline(
    observations: impl IntoIterator<Item = f64>,
    model: &dyn FactorModel,
    rule: &StopRule,
    options: &RunOptions,
) -> Result<TestOutcome> {
    let (gamma0, gamma1) = rule.thresholds()?;
    let mut lr = 1.0f64;
    let mut t = 0u64;
    let mut used = 0u64;
    let mut decision = Decision::UndecidedAtCap;
    let mut stopping_time = None;
    let mut steps = if options.log_steps { Some(Vec::new()) } else { None };

    for x in observations {
        if used >= options.max_samples {
            break;
        }
        used += 1;
        t += 1;
        let raw = model.factor(x);
        lr *= raw;
        if let Some(log) = steps.as_mut() {
            log.push(StepLog {
                t,
                raw_factor: raw,
                b: 1.0,
                b_inv: None,
                nu: None,
                nu_inv: None,
                wealth: lr,
                raw_wealth: lr,
            });
        }
        if lr >= gamma1 {
            decision = Decision::RejectNull;
            stopping_time = Some(t);
            break;
        }
        if gamma0 > 0.0 && lr <= gamma0 {
            decision = Decision::AcceptNull;
            stopping_time = Some(t);
            break;
        }
    }
    Ok(TestOutcome {
        decision,
        stopping_time,
        samples_used: used,
        raw_lr_at_stop: lr,
        boosted_wealth_at_stop: lr,
        guard_fallbacks: 0,
        max_verified_expectation: f64::NEG_INFINITY,
        steps,
    })
}
