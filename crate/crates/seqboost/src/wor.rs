//! Boosted sequential testing of a finite binary population mean under
//! sampling without replacement.
//!
//! For a population of size `N` with hypothesized mean `mu0`, the null's
//! conditional mean of the next draw is
//! `C_i = (N mu0 - sum_{j<i} X_j) / (N - i + 1)`. The betting martingale
//! multiplies by `1 + lambda_i (X_i - C_i)` with the predictable bet
//! `lambda_i = min(1/C_i, 2 (2 mu1 - 1))`. Each factor is conditionally
//! two-valued, so the boosting factor has the exact closed form of
//! [`closed_form_binary_boost`] and the boosted test is essentially free.
//!
//! Endpoints the betting rule cannot reach: `C_i <= 0` means the observed
//! ones already exceed the null total, so the null is refuted and the test
//! rejects deterministically; `C_i >= 1` makes the factor degenerate and
//! the bet is forced to zero. Both choices preserve validity.

use crate::error::{Error, Result};
use crate::process::{ProcessState, StepRule};
use crate::solver::{closed_form_binary_boost, BoostMethod};
use crate::sprt::{RunOptions, StepLog, TestOutcome};

/// Null conditional mean of the next draw: `(N mu0 - sum) / (N - draws)`.
pub fn conditional_mean(n_total: u64, mu0: f64, draws_so_far: u64, sum_so_far: f64) -> Result<f64> {
    if draws_so_far >= n_total {
        return Err(Error::domain(format!(
            "population exhausted: {draws_so_far} draws from {n_total}"
        )));
    }
    Ok((n_total as f64 * mu0 - sum_so_far) / (n_total - draws_so_far) as f64)
}

/// The betting rule `lambda = min(1/C, 2 (2 mu1 - 1))`, floored at zero.
pub fn rilacs_bet(c: f64, mu1: f64) -> Result<f64> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(Error::domain(format!(
            "bet undefined for conditional mean {c}; the null is already decided"
        )));
    }
    Ok((1.0 / c).min(2.0 * (2.0 * mu1 - 1.0)).max(0.0))
}

/// Runs the (optionally boosted) betting test over a draw sequence.
/// Draws must be 0/1 in draw order; the test stops at wealth `1/alpha` or
/// when the population is exhausted.
pub fn run_wor_boosted(
    draws: impl IntoIterator<Item = f64>,
    n_total: u64,
    mu0: f64,
    mu1: f64,
    alpha: f64,
    options: &RunOptions,
) -> Result<TestOutcome> {
    if n_total == 0 {
        return Err(Error::domain("population size must be positive".to_string()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    if !(0.0..=1.0).contains(&mu0) || !(0.0..=1.0).contains(&mu1) {
        return Err(Error::domain("means must lie in [0,1]".to_string()));
    }
    let rule = StepRule::power_one(alpha);
    let mut state = ProcessState::new();
    let mut drawn = 0u64;
    let mut ones = 0.0f64;
    let mut used = 0u64;
    let mut guard_fallbacks = 0u64;
    let mut max_verified = f64::NEG_INFINITY;
    let mut steps: Option<Vec<StepLog>> = if options.log_steps { Some(Vec::new()) } else { None };

    for x in draws {
        if used >= options.max_samples || state.status.is_stopped() {
            break;
        }
        if x != 0.0 && x != 1.0 {
            return Err(Error::input(format!("draws must be 0 or 1, got {x}")));
        }
        if drawn >= n_total {
            return Err(Error::input(format!("more draws than the population size {n_total}")));
        }
        used += 1;
        let c = conditional_mean(n_total, mu0, drawn, ones)?;
        drawn += 1;
        ones += x;

        if c < 0.0 {
            // Observed ones already exceed N*mu0: the null is impossible.
            state.t += 1;
            state.wealth = 1.0 / alpha;
            state.status = crate::process::Status::RejectNull;
            if let Some(log) = steps.as_mut() {
                log.push(StepLog {
                    t: state.t,
                    raw_factor: f64::INFINITY,
                    b: 1.0,
                    b_inv: None,
                    nu: None,
                    nu_inv: None,
                    wealth: state.wealth,
                    raw_wealth: state.raw_wealth,
                });
            }
            break;
        }
        let (bet, raw) = if c == 0.0 || c >= 1.0 {
            // At the endpoints the null pins the remaining draws (all zeros
            // at C = 0, all ones at C >= 1) and the factor degenerates; the
            // bet is forced to zero. A one observed at C = 0 turns the next
            // conditional mean negative and rejects then.
            (0.0, 1.0)
        } else {
            let bet = rilacs_bet(c, mu1)?;
            (bet, 1.0 + bet * (x - c))
        };
        state.advance_raw(raw);

        let b = if options.with_boost && bet > 0.0 && c < 1.0 {
            match closed_form_binary_boost(c, bet, state.wealth, alpha) {
                Ok(r) => {
                    if r.method == BoostMethod::FallbackOne {
                        guard_fallbacks += 1;
                    }
                    if r.verified_expectation > max_verified {
                        max_verified = r.verified_expectation;
                    }
                    r.b
                }
                // Degenerate corner (bet * C = 1): b = 1 keeps validity.
                Err(Error::Domain(_)) => 1.0,
                Err(e) => return Err(e),
            }
        } else {
            1.0
        };
        let candidate = if raw == 0.0 { 0.0 } else { b * raw };
        if state.wealth <= 0.0 {
            state.t += 1;
        } else {
            state.step_candidate(candidate, &rule)?;
        }
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

/// Builds a 0/1 population of size `n` with `round(n * mean)` ones and
/// shuffles it into draw order.
pub fn simulate_population(n: u64, mean: f64, rng: &mut dyn rand::RngCore) -> Vec<f64> {
    let ones = (n as f64 * mean).round() as u64;
    let mut pop: Vec<f64> = (0..n).map(|i| if i < ones { 1.0 } else { 0.0 }).collect();
    // Fisher-Yates.
    for i in (1..pop.len()).rev() {
        let j = rand::Rng::random_range(rng, 0..=i);
        pop.swap(i, j);
    }
    pop
}

/// Reads a newline-delimited 0/1 population file; line order is draw order.
pub fn read_population_file(path: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_string(), source })?;
    let mut draws = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line {
            "0" => draws.push(0.0),
            "1" => draws.push(1.0),
            other => {
                return Err(Error::input(format!(
                    "{path}:{}: expected 0 or 1, got {other:?}",
                    lineno + 1
                )))
            }
        }
    }
    if draws.is_empty() {
        return Err(Error::input(format!("{path}: empty population")));
    }
    Ok(draws)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DiscreteFactorModel;
    use crate::solver::{solve_boost_one_sided, GUARD_TOL};
    use crate::sprt::Decision;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conditional_mean_examples() {
        assert_eq!(conditional_mean(10, 0.5, 0, 0.0).unwrap(), 0.5);
        let c = conditional_mean(100, 0.5, 10, 6.0).unwrap();
        assert!((c - 44.0 / 90.0).abs() < 1e-15);
        // Null forces all remaining zeros.
        assert_eq!(conditional_mean(4, 0.5, 2, 2.0).unwrap(), 0.0);
        assert!(conditional_mean(4, 0.5, 4, 2.0).is_err());
    }

    #[test]
    fn bet_examples() {
        let c = 44.0 / 90.0;
        let bet = rilacs_bet(c, 0.55).unwrap();
        assert!((bet - 0.2).abs() < 1e-12, "bet = {bet}");
        // No bet at the null alternative.
        assert_eq!(rilacs_bet(0.5, 0.5).unwrap(), 0.0);
        // Tiny conditional mean: the 1/C cap binds.
        let bet = rilacs_bet(1e-3, 0.9).unwrap();
        assert!((bet - 1.6).abs() < 1e-12);
        let bet = rilacs_bet(0.9, 0.99).unwrap();
        assert!((bet - 1.0 / 0.9).abs() < 1e-12);
        assert!(rilacs_bet(0.0, 0.55).is_err());
        assert!(rilacs_bet(-0.1, 0.55).is_err());
    }

    #[test]
    fn null_factor_has_unit_conditional_mean() {
        // C*(1 + bet (1-C)) + (1-C)(1 - bet C) telescopes to exactly 1 at
        // every step of a simulated audit.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = simulate_population(200, 0.5, &mut rng);
        let (mut drawn, mut ones) = (0u64, 0.0);
        for &x in &pop {
            let c = conditional_mean(200, 0.5, drawn, ones).unwrap();
            if c <= 0.0 || c >= 1.0 {
                break;
            }
            let bet = rilacs_bet(c, 0.55).unwrap();
            let mean = c * (1.0 + bet * (1.0 - c)) + (1.0 - c) * (1.0 - bet * c);
            assert!((mean - 1.0).abs() < 1e-12, "conditional mean {mean}");
            drawn += 1;
            ones += x;
        }
    }

    #[test]
    fn closed_form_matches_generic_solver_along_audits() {
        // Cross-module oracle: at every step of a simulated audit the
        // closed-form boost equals the generic discrete solve to 1e-10.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pop = simulate_population(300, 0.55, &mut rng);
        let (n, mu0, mu1, alpha) = (300u64, 0.5, 0.55, 0.05);
        let (mut drawn, mut ones) = (0u64, 0.0);
        let mut wealth = 1.0f64;
        for &x in &pop {
            let c = conditional_mean(n, mu0, drawn, ones).unwrap();
            if c <= 0.0 || c >= 1.0 || wealth >= 1.0 / alpha || wealth <= 0.0 {
                break;
            }
            let bet = rilacs_bet(c, mu1).unwrap();
            if bet > 0.0 && bet * c < 1.0 {
                let closed = closed_form_binary_boost(c, bet, wealth, alpha).unwrap();
                let up = 1.0 + bet * (1.0 - c);
                let down = 1.0 - bet * c;
                let model = DiscreteFactorModel::two_atom(up, c, down).unwrap();
                let generic = solve_boost_one_sided(&model, wealth, alpha, 1e-13).unwrap();
                assert!(
                    (closed.b - generic.b).abs() <= 1e-10 * closed.b,
                    "step {drawn}: closed {} generic {}",
                    closed.b,
                    generic.b
                );
                assert!(closed.verified_expectation <= 1.0 + GUARD_TOL);
                let raw = 1.0 + bet * (x - c);
                wealth = (wealth * closed.b * raw).min(1.0 / alpha);
            }
            drawn += 1;
            ones += x;
        }
    }

    #[test]
    fn boosted_stops_no_later_on_identical_draws() {
        let (n, mu0, mu1, alpha) = (2000u64, 0.5, 0.55, 0.01);
        let mut earlier = 0;
        for seed in 0..25u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = simulate_population(n, mu1, &mut rng);
            let opts = RunOptions::with_max_samples(n);
            let boosted = run_wor_boosted(pop.iter().copied(), n, mu0, mu1, alpha, &opts).unwrap();
            let plain = run_wor_boosted(
                pop.iter().copied(),
                n,
                mu0,
                mu1,
                alpha,
                &RunOptions { with_boost: false, ..opts },
            )
            .unwrap();
            let tb = boosted.stopping_time.unwrap_or(u64::MAX);
            let tp = plain.stopping_time.unwrap_or(u64::MAX);
            assert!(tb <= tp, "seed {seed}: boosted {tb} later than plain {tp}");
            if tb < tp {
                earlier += 1;
            }
            assert!(boosted.boosted_wealth_at_stop <= 1.0 / alpha + 1e-12);
        }
        assert!(earlier > 0, "boosting never strictly earlier in 25 audits");
    }

    #[test]
    fn certain_rejection_when_null_impossible() {
        // Population of all ones with mu0 = 0.25 and N = 8: after 2 ones the
        // null total is exceeded at the 3rd draw.
        let draws = vec![1.0; 8];
        let out = run_wor_boosted(
            draws.iter().copied(),
            8,
            0.25,
            0.6,
            0.05,
            &RunOptions::with_max_samples(8),
        )
        .unwrap();
        assert_eq!(out.decision, Decision::RejectNull);
        assert_eq!(out.boosted_wealth_at_stop, 20.0);
    }

    #[test]
    fn invalid_draws_are_input_errors() {
        let out = run_wor_boosted(
            [0.5].into_iter(),
            4,
            0.5,
            0.55,
            0.05,
            &RunOptions::with_max_samples(8),
        );
        assert!(matches!(out, Err(Error::Input(_))));
        let out = run_wor_boosted(
            [1.0, 0.0, 1.0].into_iter(),
            2,
            0.5,
            0.55,
            0.05,
            &RunOptions::with_max_samples(8),
        );
        assert!(matches!(out, Err(Error::Input(_))));
    }

    #[test]
    fn population_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pop.txt");
        std::fs::write(&path, "1\n0\n\n1\n").unwrap();
        let draws = read_population_file(path.to_str().unwrap()).unwrap();
        assert_eq!(draws, vec![1.0, 0.0, 1.0]);
        std::fs::write(&path, "1\n2\n").unwrap();
        assert!(read_population_file(path.to_str().unwrap()).is_err());
    }
}
