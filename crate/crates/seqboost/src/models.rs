//! Factor oracles: conditional distributions of the next multiplicative
//! factor `L_t` under the null (and alternative), with closed-form truncated
//! expectations.
//!
//! A boosting factor can be solved only if the conditional null law of `L_t`
//! is known. The [`FactorModel`] contract exposes that law two ways:
//!
//! - continuous models report the factor CDF under the null, `F0(y) =
//!   P_0(L <= y)`, and under the induced alternative `dP_1 = L dP_0`,
//!   `F1(y) = P_1(L <= y)`; the change of measure turns
//!   `E_0[b L 1{lo < L <= hi}]` into `b (F1(hi) - F1(lo))`;
//! - discrete models report their finite atom list and the expectation is an
//!   exact sum.
//!
//! For a simple-vs-simple likelihood ratio `L = p1(X)/p0(X)` the induced
//! alternative is the literal alternative distribution. For the Gaussian
//! pair `N(mu0,1)` vs `N(mu0+delta,1)`,
//!
//! ```text
//!     lambda(x)      = exp(delta (x - mu0) - delta^2/2)
//!     lambda^{-1}(y) = (delta^2/2 + log y)/delta + mu0
//!     F0(y) = Phi(log(y)/delta + delta/2)
//!     F1(y) = Phi(log(y)/delta - delta/2),
//! ```
//!
//! so the truncated expectation is the two-Phi closed form used throughout;
//! it depends on the model only through `delta`.
//!
//! History enters only through declared summaries: the predictable plugin
//! keeps a prefix sum, sampling without replacement keeps running totals.
//! Models are immutable after construction and safe to share across threads.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::std_normal_cdf;
use crate::process::truncate_two_sided;

/// One support point of a discrete factor distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorAtom {
    /// Factor value `L`.
    pub value: f64,
    /// `P_0(L_t = value)`.
    pub p_null: f64,
    /// `P_1(L_t = value)` under the induced alternative `dP_1 = L dP_0`.
    pub p_alt: f64,
}

/// Oracle for the conditional law of the next factor `L_t`.
pub trait FactorModel: Send + Sync {
    /// `P_0(L_t <= y)`.
    fn factor_null_cdf(&self, y: f64) -> f64;

    /// `P_1(L_t <= y)` where `dP_1 = L_t dP_0`.
    fn factor_alt_cdf(&self, y: f64) -> f64;

    /// Atoms of a discrete factor law; `None` for continuous models.
    fn atoms(&self) -> Option<&[FactorAtom]>;

    fn is_continuous(&self) -> bool {
        self.atoms().is_none()
    }

    /// Factor value for a raw observation.
    fn factor(&self, x: f64) -> f64;

    /// Draw one observation under the null.
    fn sample_null(&self, rng: &mut dyn RngCore) -> f64;

    /// Draw one observation under the alternative.
    fn sample_alt(&self, rng: &mut dyn RngCore) -> f64;

    /// The mirrored testing problem: a model whose null factor law equals
    /// the law of `1/L_t` under the alternative, used for the inverse
    /// process of the coupled two-sided system.
    fn inverse(&self) -> Box<dyn FactorModel>;

    /// Whether the family has a monotone likelihood ratio in the
    /// observation, which grants composite one-sided null validity.
    fn has_mlr(&self) -> bool {
        false
    }
}

// ---------------------------------------------------------------------------
// Gaussian likelihood ratio
// ---------------------------------------------------------------------------

/// Simple Gaussian testing problem `N(mu0, 1)` vs `N(mu0 + delta, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLr {
    pub mu0: f64,
    pub delta: f64,
}

impl GaussianLr {
    pub fn new(mu0: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::domain(format!("delta must be positive, got {delta}")));
        }
        if !mu0.is_finite() {
            return Err(Error::domain(format!("mu0 must be finite, got {mu0}")));
        }
        Ok(GaussianLr { mu0, delta })
    }

    /// Alternative mean `mu1 = mu0 + delta`.
    pub fn mu1(&self) -> f64 {
        self.mu0 + self.delta
    }

    /// `lambda(x) = exp(delta (x - mu0) - delta^2/2)`, strictly increasing.
    pub fn lr(&self, x: f64) -> f64 {
        (self.delta * (x - self.mu0) - 0.5 * self.delta * self.delta).exp()
    }

    /// `lambda^{-1}(y) = (delta^2/2 + log y)/delta + mu0`.
    pub fn lr_inverse(&self, y: f64) -> Result<f64> {
        if !(y > 0.0) {
            return Err(Error::domain(format!("lr_inverse needs y > 0, got {y}")));
        }
        Ok((0.5 * self.delta * self.delta + y.ln()) / self.delta + self.mu0)
    }
}

impl FactorModel for GaussianLr {
    fn factor_null_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            std_normal_cdf(y.ln() / self.delta + 0.5 * self.delta)
        }
    }

    fn factor_alt_cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            std_normal_cdf(y.ln() / self.delta - 0.5 * self.delta)
        }
    }

    fn atoms(&self) -> Option<&[FactorAtom]> {
        None
    }

    fn factor(&self, x: f64) -> f64 {
        self.lr(x)
    }

    fn sample_null(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu0 + z
    }

    fn sample_alt(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mu1() + z
    }

    fn inverse(&self) -> Box<dyn FactorModel> {
        // Under P_1 the inverse factor 1/lambda(X) has the same law as
        // lambda(X) under P_0 (negate the noise), so the mirrored problem is
        // the same family with the same delta. Observations of the mirrored
        // model live on the reflected axis; the solver only uses factor laws.
        Box::new(GaussianLr { mu0: -self.mu1(), delta: self.delta })
    }

    fn has_mlr(&self) -> bool {
        true
    }
}

// ---------------------------------------------------------------------------
// Bernoulli likelihood ratio
// ---------------------------------------------------------------------------

/// Simple Bernoulli testing problem with success probabilities `p0` vs `p1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BernoulliLr {
    pub p0: f64,
    pub p1: f64,
    #[serde(skip)]
    atoms: [FactorAtom; 2],
}

impl<'de> Deserialize<'de> for BernoulliLr {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            p0: f64,
            p1: f64,
        }
        let w = Wire::deserialize(deserializer)?;
        BernoulliLr::new(w.p0, w.p1).map_err(serde::de::Error::custom)
    }
}

impl BernoulliLr {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        for (name, p) in [("p0", p0), ("p1", p1)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::domain(format!("{name} must be in (0,1), got {p}")));
            }
        }
        if p0 == p1 {
            return Err(Error::domain("p0 and p1 must differ".to_string()));
        }
        let on = FactorAtom { value: p1 / p0, p_null: p0, p_alt: p1 };
        let off = FactorAtom { value: (1.0 - p1) / (1.0 - p0), p_null: 1.0 - p0, p_alt: 1.0 - p1 };
        // Keep atoms sorted by factor value.
        let atoms = if on.value < off.value { [on, off] } else { [off, on] };
        Ok(BernoulliLr { p0, p1, atoms })
    }
}

impl FactorModel for BernoulliLr {
    fn factor_null_cdf(&self, y: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value <= y).map(|a| a.p_null).sum()
    }

    fn factor_alt_cdf(&self, y: f64) -> f64 {
        self.atoms.iter().filter(|a| a.value <= y).map(|a| a.p_alt).sum()
    }

    fn atoms(&self) -> Option<&[FactorAtom]> {
        Some(&self.atoms)
    }

    fn factor(&self, x: f64) -> f64 {
        if x > 0.5 {
            self.p1 / self.p0
        } else {
            (1.0 - self.p1) / (1.0 - self.p0)
        }
    }

    fn sample_null(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rand::Rng::random(rng);
        if u < self.p0 {
            1.0
        } else {
            0.0
        }
    }

    fn sample_alt(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rand::Rng::random(rng);
        if u < self.p1 {
            1.0
        } else {
            0.0
        }
    }

    fn inverse(&self) -> Box<dyn FactorModel> {
        // Swapping the roles of null and alternative inverts every factor
        // value and swaps the measures.
        Box::new(BernoulliLr::new(self.p1, self.p0).expect("parameters already validated"))
    }

    fn has_mlr(&self) -> bool {
        self.p1 > self.p0
    }
}

// ---------------------------------------------------------------------------
// Generic discrete factor model
// ---------------------------------------------------------------------------

/// A factor law given directly by its atoms. Observations are the factor
/// values themselves. This is the extension point for conditional two-atom
/// laws such as the sampling-without-replacement factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFactorModel {
    atoms: Vec<FactorAtom>,
}

impl DiscreteFactorModel {
    /// Validates that null probabilities form a distribution and that the
    /// factor satisfies the supermartingale condition `E_0[L] <= 1`.
    pub fn new(mut atoms: Vec<FactorAtom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("atom list must be nonempty".to_string()));
        }
        let mut p_sum = 0.0;
        let mut mean = 0.0;
        for a in &atoms {
            if !(a.value >= 0.0) || !a.value.is_finite() {
                return Err(Error::domain(format!(
                    "atom values must be finite and nonnegative, got {}",
                    a.value
                )));
            }
            if !(0.0..=1.0 + 1e-12).contains(&a.p_null) || !(0.0..=1.0 + 1e-12).contains(&a.p_alt) {
                return Err(Error::domain("atom probabilities must lie in [0,1]".to_string()));
            }
            p_sum += a.p_null;
            mean += a.p_null * a.value;
        }
        if (p_sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("null probabilities must sum to 1, got {p_sum}")));
        }
        if mean > 1.0 + 1e-9 {
            return Err(Error::domain(format!(
                "supermartingale condition violated: E_0[L] = {mean} > 1"
            )));
        }
        atoms.sort_by(|a, b| a.value.total_cmp(&b.value));
        Ok(DiscreteFactorModel { atoms })
    }

    /// Two-atom law induced by the change of measure (`p_alt = p_null * value`).
    pub fn two_atom(value_hi: f64, p_hi: f64, value_lo: f64) -> Result<Self> {
        let p_lo = 1.0 - p_hi;
        DiscreteFactorModel::new(vec![
            FactorAtom { value: value_hi, p_null: p_hi, p_alt: p_hi * value_hi },
            FactorAtom { value: value_lo, p_null: p_lo, p_alt: p_lo * value_lo },
        ])
    }
}

impl FactorModel for DiscreteFactorModel {
    fn factor_null_cdf(&self, y: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.value <= y).map(|a| a.p_null).sum()
    }

    fn factor_alt_cdf(&self, y: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.value <= y).map(|a| a.p_alt).sum()
    }

    fn atoms(&self) -> Option<&[FactorAtom]> {
        Some(&self.atoms)
    }

    fn factor(&self, x: f64) -> f64 {
        x
    }

    fn sample_null(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.p_null;
            if u < acc {
                return a.value;
            }
        }
        self.atoms.last().expect("nonempty").value
    }

    fn sample_alt(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        for a in &self.atoms {
            acc += a.p_alt;
            if u < acc {
                return a.value;
            }
        }
        self.atoms.last().expect("nonempty").value
    }

    fn inverse(&self) -> Box<dyn FactorModel> {
        let atoms = self
            .atoms
            .iter()
            .filter(|a| a.value > 0.0)
            .map(|a| FactorAtom { value: 1.0 / a.value, p_null: a.p_alt, p_alt: a.p_null })
            .collect();
        Box::new(DiscreteFactorModel::new(atoms).expect("inverse atoms valid"))
    }
}

// ---------------------------------------------------------------------------
// Truncated expectations
// ---------------------------------------------------------------------------

fn check_expectation_args(b: f64, wealth: f64, nu: f64, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha must be in (0,1), got {alpha}")));
    }
    if !(wealth > 0.0 && wealth < 1.0 / alpha) {
        return Err(Error::domain(format!(
            "wealth must lie in (0, 1/alpha) = (0, {}), got {wealth}; the boost is undefined outside",
            1.0 / alpha
        )));
    }
    if !(0.0..=1.0 / alpha).contains(&nu) {
        return Err(Error::domain(format!("nu must lie in [0, 1/alpha], got {nu}")));
    }
    if !(b >= 1.0) {
        return Err(Error::domain(format!("boosting factor must be >= 1, got {b}")));
    }
    Ok(())
}

/// `E_0[T_alpha(b * L_t; M)]`: closed form for continuous models, exact atom
/// sum for discrete ones. Continuous and nondecreasing in `b`; at `b = 1`
/// the value is at most one.
pub fn truncated_expectation_one_sided(
    model: &dyn FactorModel,
    b: f64,
    wealth: f64,
    alpha: f64,
) -> Result<f64> {
    truncated_expectation_two_sided(model, b, wealth, 0.0, alpha)
}

/// `E_0[T_alpha(b * L_t; M, nu)]`; equals the one-sided expectation at
/// `nu = 0` and is dominated by it for `nu > 0`.
pub fn truncated_expectation_two_sided(
    model: &dyn FactorModel,
    b: f64,
    wealth: f64,
    nu: f64,
    alpha: f64,
) -> Result<f64> {
    check_expectation_args(b, wealth, nu, alpha)?;
    if let Some(atoms) = model.atoms() {
        let mut sum = 0.0;
        for a in atoms {
            if a.p_null == 0.0 || a.value == 0.0 {
                // Zero factors are futile regardless of b; skipping avoids 0 * inf.
                continue;
            }
            sum += a.p_null * truncate_two_sided(b * a.value, wealth, nu, alpha)?;
        }
        Ok(sum)
    } else {
        let cap = 1.0 / (wealth * alpha);
        let hi_cut = 1.0 / (b * alpha * wealth);
        let lo_cut = nu / (b * wealth);
        let tail = 1.0 - model.factor_null_cdf(hi_cut);
        if lo_cut >= hi_cut {
            // Futility and cap regions touch (nu clamped at 1/alpha): the
            // factor is 0 or cap only.
            Ok(cap * tail)
        } else {
            let middle = model.factor_alt_cdf(hi_cut) - model.factor_alt_cdf(lo_cut);
            Ok(b * middle.max(0.0) + cap * tail)
        }
    }
}

// ---------------------------------------------------------------------------
// Predictable plugins
// ---------------------------------------------------------------------------

/// Smoothed maximum-likelihood plugin `theta_t = max((theta0 + S_{t-1})/t, theta0)`
/// where `S_{t-1}` is the sum of the observations strictly before `t`.
pub fn plugin_theta(t: u64, prefix_sum: f64, theta0: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::domain("plugin_theta requires t >= 1".to_string()));
    }
    Ok(((theta0 + prefix_sum) / t as f64).max(theta0))
}

/// Predictable rule for the alternative parameter of a plugin SPRT. The rule
/// sees only the time index and the prefix sum of past observations, which
/// keeps it predictable by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PluginSchedule {
    /// The smoothed MLE above.
    SmoothedMle,
    /// A fixed alternative `theta_t = max(theta1, theta0)`.
    Constant(f64),
}

impl PluginSchedule {
    pub fn theta(&self, t: u64, prefix_sum: f64, theta0: f64) -> Result<f64> {
        match self {
            PluginSchedule::SmoothedMle => plugin_theta(t, prefix_sum, theta0),
            PluginSchedule::Constant(theta1) => Ok(theta1.max(theta0)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal::std_normal_pdf;
    use proptest::prelude::*;
    use rand::SeedableRng;

    // Adaptive Simpson quadrature, used as an implementation-independent
    // oracle for the closed-form expectations.
    fn simpson(_f: &dyn Fn(f64) -> f64, a: f64, _m: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    fn adaptive(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(f, a, lm, m, fa, flm, fm);
        let right = simpson(f, m, rm, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * eps {
            left + right + (left + right - whole) / 15.0
        } else {
            adaptive(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + adaptive(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
        let f = &f as &dyn Fn(f64) -> f64;
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = simpson(f, a, m, b, fa, fm, fb);
        adaptive(f, a, b, fa, fm, fb, whole, eps, 48)
    }

    /// Oracle: E_theta[T_alpha(b lambda(X); M, nu)] with X ~ N(theta, 1),
    /// by quadrature over the observation density.
    fn gaussian_expectation_quad(
        model: &GaussianLr,
        b: f64,
        wealth: f64,
        nu: f64,
        alpha: f64,
        theta: f64,
    ) -> f64 {
        let f = |x: f64| {
            truncate_two_sided(b * model.lr(x), wealth, nu, alpha).unwrap()
                * std_normal_pdf(x - theta)
        };
        integrate(f, theta - 14.0, theta + 14.0, 1e-12)
    }

    #[test]
    fn gaussian_lr_examples() {
        let m = GaussianLr::new(0.0, 2.0).unwrap();
        // Exponent vanishes at mu0 + delta/2.
        assert!((m.lr(1.0) - 1.0).abs() < 1e-15);
        assert!((m.lr_inverse(1.0).unwrap() - 1.0).abs() < 1e-15);
        // lambda(2) = e^2 for delta=2, mu0=0.
        assert!((m.lr(2.0) - 7.38905609893065).abs() < 1e-12);
        assert!(m.lr_inverse(0.0).is_err());
        assert!(m.lr_inverse(-1.0).is_err());
        // Round trip.
        for &x in &[-3.0, -0.5, 0.0, 1.3, 4.0] {
            let y = m.lr(x);
            assert!((m.lr_inverse(y).unwrap() - x).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_expectation_matches_paper_value() {
        // Table value: delta=2, b=1.27600 at wealth 1, alpha=0.05 makes the
        // expectation one to 1e-4.
        let m = GaussianLr::new(0.0, 2.0).unwrap();
        let e = truncated_expectation_one_sided(&m, 1.27600, 1.0, 0.05).unwrap();
        assert!((e - 1.0).abs() < 1e-4, "E = {e}");
    }

    #[test]
    fn expectation_limit_large_b() {
        let m = GaussianLr::new(0.0, 1.0).unwrap();
        // b -> inf: expectation tends to P_0(L > 0)/(M alpha) = 1/(M alpha).
        let e = truncated_expectation_one_sided(&m, 1e12, 0.5, 0.05).unwrap();
        assert!((e - 1.0 / (0.5 * 0.05)).abs() < 1e-6, "E = {e}");

        let bern = BernoulliLr::new(1.0 / 3.0, 2.0 / 3.0).unwrap();
        let e = truncated_expectation_one_sided(&bern, 1e15, 0.9, 0.05).unwrap();
        assert!((e - 1.0 / (0.9 * 0.05)).abs() < 1e-9, "E = {e}");
    }

    #[test]
    fn bernoulli_unit_boost_is_martingale() {
        // Atoms {2 w.p. 1/3, 1/2 w.p. 2/3} under the null; at b=1, M=1 no
        // truncation is active and the expectation is exactly E_0[L] = 1.
        let m = BernoulliLr::new(1.0 / 3.0, 2.0 / 3.0).unwrap();
        let e = truncated_expectation_one_sided(&m, 1.0, 1.0, 0.05).unwrap();
        assert!((e - 1.0).abs() < 1e-15, "E = {e}");
    }

    #[test]
    fn bernoulli_example_two_sided_value() {
        // E_0[T(7/4 * L; M=8, nu=7)] = 5/6 exactly.
        let m = BernoulliLr::new(1.0 / 3.0, 2.0 / 3.0).unwrap();
        let e = truncated_expectation_two_sided(&m, 7.0 / 4.0, 8.0, 7.0, 0.05).unwrap();
        assert!((e - 5.0 / 6.0).abs() < 1e-12, "E = {e}");
    }

    #[test]
    fn two_sided_table_value() {
        let m = GaussianLr::new(0.0, 2.0).unwrap();
        let e = truncated_expectation_two_sided(&m, 1.38991, 1.0, 0.4, 0.05).unwrap();
        assert!((e - 1.0).abs() < 1e-4, "E = {e}");
    }

    #[test]
    fn domain_errors() {
        let m = GaussianLr::new(0.0, 1.0).unwrap();
        // wealth at or above 1/alpha.
        assert!(truncated_expectation_one_sided(&m, 1.0, 20.0, 0.05).is_err());
        assert!(truncated_expectation_one_sided(&m, 1.0, 25.0, 0.05).is_err());
        assert!(truncated_expectation_one_sided(&m, 1.0, 0.0, 0.05).is_err());
        assert!(truncated_expectation_two_sided(&m, 1.0, 1.0, 30.0, 0.05).is_err());
        assert!(truncated_expectation_one_sided(&m, 0.5, 1.0, 0.05).is_err());
        assert!(GaussianLr::new(0.0, 0.0).is_err());
        assert!(BernoulliLr::new(0.5, 0.5).is_err());
        assert!(BernoulliLr::new(0.0, 0.5).is_err());
    }

    #[test]
    fn closed_form_agrees_with_quadrature() {
        // Spot grid here; the full acceptance grid lives in the oracle suite.
        let alpha = 0.05;
        for &delta in &[0.5, 2.0] {
            let m = GaussianLr::new(0.0, delta).unwrap();
            for &wealth in &[0.5, 4.0] {
                for &b in &[1.0, 1.3, 6.0] {
                    for &nu in &[0.0, 0.4] {
                        let closed =
                            truncated_expectation_two_sided(&m, b, wealth, nu, alpha).unwrap();
                        let quad = gaussian_expectation_quad(&m, b, wealth, nu, alpha, m.mu0);
                        assert!(
                            (closed - quad).abs() < 1e-8,
                            "delta={delta} M={wealth} b={b} nu={nu}: closed={closed} quad={quad}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn mlr_validity_below_null() {
        // For theta <= theta0 the truncated expectation under theta is
        // dominated by its value under theta0 (composite-null validity).
        let alpha = 0.05;
        let m = GaussianLr::new(0.0, 1.5).unwrap();
        for &(b, wealth) in &[(1.2, 1.0), (2.0, 4.0)] {
            let at_null = gaussian_expectation_quad(&m, b, wealth, 0.0, alpha, 0.0);
            for &theta in &[-2.0, -1.0, -0.25] {
                let below = gaussian_expectation_quad(&m, b, wealth, 0.0, alpha, theta);
                assert!(
                    below <= at_null + 1e-10,
                    "theta={theta}: E={below} exceeds null value {at_null}"
                );
            }
        }
        // Bernoulli version on an atom grid.
        let bern = BernoulliLr::new(0.3, 0.6).unwrap();
        let (b, wealth) = (1.4, 6.0);
        let expect_at = |p: f64| {
            let hi = truncate_two_sided(b * 0.6 / 0.3, wealth, 0.0, alpha).unwrap();
            let lo = truncate_two_sided(b * 0.4 / 0.7, wealth, 0.0, alpha).unwrap();
            p * hi + (1.0 - p) * lo
        };
        assert!(bern.has_mlr());
        let at_null = expect_at(0.3);
        for &p in &[0.05, 0.15, 0.25] {
            assert!(expect_at(p) <= at_null + 1e-12);
        }
    }

    #[test]
    fn factor_has_unit_null_mean() {
        // E_0[L] = 1 for likelihood-ratio models: F1(inf) = 1 by quadrature
        // and by atom sums.
        let m = GaussianLr::new(0.3, 1.2).unwrap();
        let mean = integrate(|x| m.lr(x) * std_normal_pdf(x - 0.3), -14.0 + 0.3, 14.0 + 0.3, 1e-12);
        assert!((mean - 1.0).abs() < 1e-9, "E_0[lambda] = {mean}");
        let bern = BernoulliLr::new(0.2, 0.7).unwrap();
        let mean: f64 = bern.atoms().unwrap().iter().map(|a| a.p_null * a.value).sum();
        assert!((mean - 1.0).abs() < 1e-15);
        // Alt probabilities also sum to one.
        let alt: f64 = bern.atoms().unwrap().iter().map(|a| a.p_alt).sum();
        assert!((alt - 1.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        // Average of T(b L) under the null over 10^6 draws within 3 SE of
        // the closed form.
        let m = GaussianLr::new(0.0, 2.0).unwrap();
        let (b, wealth, alpha) = (1.276, 1.0, 0.05);
        let closed = truncated_expectation_one_sided(&m, b, wealth, alpha).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(417);
        let n = 1_000_000u64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let x = m.sample_null(&mut rng);
            let v = truncate_two_sided(b * m.lr(x), wealth, 0.0, alpha).unwrap();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = (sumsq / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - closed).abs() <= 3.0 * se,
            "MC mean {mean} vs closed {closed}, SE {se}"
        );
    }

    #[test]
    fn plugin_theta_examples() {
        assert_eq!(plugin_theta(1, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(plugin_theta(2, 1.0, 0.0).unwrap(), 0.5);
        // Floor at theta0.
        assert_eq!(plugin_theta(3, -2.0, 0.0).unwrap(), 0.0);
        assert!(plugin_theta(0, 0.0, 0.0).is_err());
        assert_eq!(PluginSchedule::Constant(0.9).theta(5, 100.0, 0.0).unwrap(), 0.9);
    }

    #[test]
    fn discrete_model_validation() {
        assert!(DiscreteFactorModel::new(vec![]).is_err());
        // Null probs must sum to 1.
        assert!(DiscreteFactorModel::new(vec![FactorAtom {
            value: 1.0,
            p_null: 0.5,
            p_alt: 0.5
        }])
        .is_err());
        // Supermartingale condition.
        assert!(DiscreteFactorModel::new(vec![FactorAtom {
            value: 2.0,
            p_null: 1.0,
            p_alt: 1.0
        }])
        .is_err());
        let ok = DiscreteFactorModel::two_atom(1.2, 0.5, 0.8).unwrap();
        assert_eq!(ok.atoms().unwrap().len(), 2);
    }

    #[test]
    fn inverse_models_mirror() {
        let bern = BernoulliLr::new(1.0 / 3.0, 2.0 / 3.0).unwrap();
        let inv = bern.inverse();
        // Inverse factor values are reciprocals with swapped measures.
        let atoms = inv.atoms().unwrap();
        let vals: Vec<f64> = atoms.iter().map(|a| a.value).collect();
        assert!(vals.contains(&0.5) && vals.contains(&2.0));
        for a in atoms {
            if a.value == 0.5 {
                assert!((a.p_null - 2.0 / 3.0).abs() < 1e-15);
            }
        }
        // Gaussian mirror keeps delta, hence identical factor laws.
        let g = GaussianLr::new(0.7, 1.1).unwrap();
        let ginv = g.inverse();
        for &y in &[0.2, 1.0, 3.0] {
            assert!((g.factor_null_cdf(y) - ginv.factor_null_cdf(y)).abs() < 1e-15);
        }
    }

    proptest! {
        // The two-sided expectation is dominated by the one-sided one and
        // equals it at nu = 0.
        #[test]
        fn two_sided_dominated_by_one_sided(
            delta in 0.1..3.0f64,
            wealth_frac in 0.01..0.99f64,
            b in 1.0..10.0f64,
            nu_frac in 0.0..1.0f64,
        ) {
            let alpha = 0.05;
            let wealth = wealth_frac / alpha;
            let nu = nu_frac / alpha;
            let m = GaussianLr::new(0.0, delta).unwrap();
            let one = truncated_expectation_one_sided(&m, b, wealth, alpha).unwrap();
            let two = truncated_expectation_two_sided(&m, b, wealth, nu, alpha).unwrap();
            prop_assert!(two <= one + 1e-12);
            let at_zero = truncated_expectation_two_sided(&m, b, wealth, 0.0, alpha).unwrap();
            prop_assert_eq!(one, at_zero);
        }

        // Expectation is nondecreasing in b.
        #[test]
        fn expectation_monotone_in_b(
            delta in 0.1..3.0f64,
            wealth_frac in 0.01..0.99f64,
            b in 1.0..10.0f64,
            db in 0.0..5.0f64,
        ) {
            let alpha = 0.05;
            let wealth = wealth_frac / alpha;
            let m = GaussianLr::new(0.0, delta).unwrap();
            let lo = truncated_expectation_one_sided(&m, b, wealth, alpha).unwrap();
            let hi = truncated_expectation_one_sided(&m, b + db, wealth, alpha).unwrap();
            prop_assert!(hi >= lo - 1e-12);
        }
    }
}
