//! Admissible right-hand sides `g(x, s)` with analytic primitives and
//! executable checks of the superlinear structure hypotheses.
//!
//! Every model satisfies `g(x, 0) = 0`, `g > 0` for `s > 0`, and has an
//! exponent `mu > 2` for which `g / s^(mu-1)` and `s g / mu - G` are
//! nondecreasing in `s`. [`check_structure`] measures how well a model keeps
//! those promises on a sample set.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// A point of the physical domain. Radial grids pass `[r, 0.0]`.
pub type Point = [f64; 2];

/// Spatial/amplitude weights `a(x, s)` of the weighted-power family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    /// `a = a3 + a4 s^(p - mu)`
    Affine { a3: f64, a4: f64, p: f64 },
    /// `a = (1 + |x|^2)(a3 + a4 s^(p - mu))`
    SpatialAffine { a3: f64, a4: f64, p: f64 },
    /// `a = a3 + a4 ln(1 + s)`; its primitive has no closed form.
    Logarithmic { a3: f64, a4: f64 },
}

/// Growth class of a model at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Growth {
    Subcritical { exponent: f64 },
    Critical { exponent: f64 },
    Exponential,
}

/// The closed catalog of nonlinearities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearityModel {
    /// `g = s^(p-1)`
    PurePower { p: f64 },
    /// `g = sum_i s^(p_i - 1)`
    SumOfPowers { exponents: Vec<f64> },
    /// `g = a(x, s) s^(mu-1)`
    WeightedPower { mu: f64, weight: Weight },
    /// `g = kappa s^(2*-1) + lambda s^(mu-1)` with `2* = 2N/(N-2)`
    CriticalCombo {
        kappa: f64,
        lambda: f64,
        mu: f64,
        dim: u32,
    },
    /// `g = a1 s (exp(a2 s^2) - 1)`, a Trudinger-Moser type growth for `N = 2`.
    ExponentialN2 { a1: f64, a2: f64 },
}

fn invalid(msg: impl Into<String>) -> ModelError {
    ModelError::InvalidParameters(msg.into())
}

/// `exp(x) - 1 - x` without cancellation for small `x`.
fn expm1_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

const GAUSS_ORDER: usize = 12;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
fn gauss_legendre() -> &'static [(f64, f64); GAUSS_ORDER] {
    static RULE: OnceLock<[(f64, f64); GAUSS_ORDER]> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GAUSS_ORDER;
        let mut rule = [(0.0, 0.0); GAUSS_ORDER];
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule[i] = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        rule
    })
}

/// `∫_0^s f` for integrands vanishing like a power at 0, on dyadic panels
/// `[s 2^-(k+1), s 2^-k]` until the panels stop contributing.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: &F, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let rule = gauss_legendre();
    let mut total = 0.0;
    let mut hi = s;
    for _ in 0..200 {
        let lo = 0.5 * hi;
        let (c, r) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        let panel: f64 = rule.iter().map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r;
        total += panel;
        if panel.abs() <= 1e-18 * total.abs() {
            break;
        }
        hi = lo;
    }
    total
}

impl Weight {
    fn spatial_factor(&self, x: Point) -> f64 {
        match self {
            Weight::SpatialAffine { .. } => 1.0 + x[0] * x[0] + x[1] * x[1],
            _ => 1.0,
        }
    }

    fn validate(&self, mu: f64) -> Result<(), ModelError> {
        let (a3, a4) = match *self {
            Weight::Affine { a3, a4, p } | Weight::SpatialAffine { a3, a4, p } => {
                if !(p >= mu) {
                    return Err(invalid(format!("weight exponent p = {p} must be >= mu = {mu}")));
                }
                (a3, a4)
            }
            Weight::Logarithmic { a3, a4 } => (a3, a4),
        };
        if !(a3 > 0.0 && a4 > 0.0) {
            return Err(invalid("weight coefficients a3, a4 must be positive"));
        }
        Ok(())
    }
}

impl NonlinearityModel {
    /// Checks parameter ranges. Constructors in the CLI call this before use.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            NonlinearityModel::PurePower { p } => {
                if !(*p > 2.0) || !p.is_finite() {
                    return Err(invalid(format!("pure power needs p > 2, got {p}")));
                }
            }
            NonlinearityModel::SumOfPowers { exponents } => {
                if exponents.is_empty() {
                    return Err(invalid("sum of powers needs at least one exponent"));
                }
                if let Some(p) = exponents.iter().find(|p| !(**p > 2.0) || !p.is_finite()) {
                    return Err(invalid(format!("sum of powers needs every exponent > 2, got {p}")));
                }
            }
            NonlinearityModel::WeightedPower { mu, weight } => {
                if !(*mu > 2.0) || !mu.is_finite() {
                    return Err(invalid(format!("weighted power needs mu > 2, got {mu}")));
                }
                weight.validate(*mu)?;
            }
            NonlinearityModel::CriticalCombo {
                kappa,
                lambda,
                mu,
                dim,
            } => {
                if *dim < 3 {
                    return Err(invalid(format!("critical combination needs N >= 3, got {dim}")));
                }
                if !(*kappa > 0.0 && *lambda > 0.0) {
                    return Err(invalid("critical combination needs kappa, lambda > 0"));
                }
                let crit = critical_exponent(*dim);
                if !(*mu > 2.0 && *mu < crit) {
                    return Err(invalid(format!("critical combination needs 2 < mu < {crit}, got {mu}")));
                }
            }
            NonlinearityModel::ExponentialN2 { a1, a2 } => {
                if !(*a1 > 0.0 && *a2 > 0.0) {
                    return Err(invalid("exponential model needs a1, a2 > 0"));
                }
            }
        }
        Ok(())
    }

    /// The exponent `mu > 2` of the monotonicity hypothesis.
    pub fn mu(&self) -> f64 {
        match self {
            NonlinearityModel::PurePower { p } => *p,
            NonlinearityModel::SumOfPowers { exponents } => {
                exponents.iter().copied().fold(f64::INFINITY, f64::min)
            }
            NonlinearityModel::WeightedPower { mu, .. } => *mu,
            NonlinearityModel::CriticalCombo { mu, .. } => *mu,
            NonlinearityModel::ExponentialN2 { .. } => 4.0,
        }
    }

    /// Growth at infinity. The logarithmic weight grows slower than any
    /// power, so it is reported with exponent `mu`.
    pub fn growth(&self) -> Growth {
        match self {
            NonlinearityModel::PurePower { p } => Growth::Subcritical { exponent: *p },
            NonlinearityModel::SumOfPowers { exponents } => Growth::Subcritical {
                exponent: exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            },
            NonlinearityModel::WeightedPower { mu, weight } => match weight {
                Weight::Affine { p, .. } | Weight::SpatialAffine { p, .. } => {
                    Growth::Subcritical { exponent: *p }
                }
                Weight::Logarithmic { .. } => Growth::Subcritical { exponent: *mu },
            },
            NonlinearityModel::CriticalCombo { dim, .. } => Growth::Critical {
                exponent: critical_exponent(*dim),
            },
            NonlinearityModel::ExponentialN2 { .. } => Growth::Exponential,
        }
    }

    /// Spatial dimension the model is tied to, if any.
    pub fn required_dim(&self) -> Option<u32> {
        match self {
            NonlinearityModel::CriticalCombo { dim, .. } => Some(*dim),
            _ => None,
        }
    }

    /// `g(x, s)`.
    pub fn eval_g(&self, x: Point, s: f64) -> Result<f64, ModelError> {
        if s < 0.0 || s.is_nan() {
            return Err(ModelError::NegativeArgument(s));
        }
        Ok(self.g(x, s))
    }

    /// `G(x, s) = int_0^s g(x, t) dt`.
    #[allow(non_snake_case)]
    pub fn eval_G(&self, x: Point, s: f64) -> Result<f64, ModelError> {
        if s < 0.0 || s.is_nan() {
            return Err(ModelError::NegativeArgument(s));
        }
        Ok(self.primitive(x, s))
    }

    /// `g(x, s)` for `s >= 0` already guaranteed by the caller.
    pub(crate) fn g(&self, x: Point, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            NonlinearityModel::PurePower { p } => s.powf(p - 1.0),
            NonlinearityModel::SumOfPowers { exponents } => {
                exponents.iter().map(|p| s.powf(p - 1.0)).sum()
            }
            NonlinearityModel::WeightedPower { mu, weight } => {
                let w = weight.spatial_factor(x);
                match *weight {
                    Weight::Affine { a3, a4, p } | Weight::SpatialAffine { a3, a4, p } => {
                        w * (a3 * s.powf(mu - 1.0) + a4 * s.powf(p - 1.0))
                    }
                    Weight::Logarithmic { a3, a4 } => w * (a3 + a4 * s.ln_1p()) * s.powf(mu - 1.0),
                }
            }
            NonlinearityModel::CriticalCombo {
                kappa,
                lambda,
                mu,
                dim,
            } => {
                let crit = critical_exponent(*dim);
                kappa * s.powf(crit - 1.0) + lambda * s.powf(mu - 1.0)
            }
            NonlinearityModel::ExponentialN2 { a1, a2 } => a1 * s * (a2 * s * s).exp_m1(),
        }
    }

    /// `G(x, s)` for `s >= 0`.
    pub(crate) fn primitive(&self, x: Point, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            NonlinearityModel::PurePower { p } => s.powf(*p) / p,
            NonlinearityModel::SumOfPowers { exponents } => {
                exponents.iter().map(|p| s.powf(*p) / p).sum()
            }
            NonlinearityModel::WeightedPower { mu, weight } => {
                let w = weight.spatial_factor(x);
                match *weight {
                    Weight::Affine { a3, a4, p } | Weight::SpatialAffine { a3, a4, p } => {
                        w * (a3 * s.powf(*mu) / mu + a4 * s.powf(p) / p)
                    }
                    Weight::Logarithmic { a3, a4 } => {
                        let m = *mu;
                        let tail =
                            integrate_from_zero(&|t: f64| t.powf(m - 1.0) * t.ln_1p(), s);
                        w * (a3 * s.powf(m) / m + a4 * tail)
                    }
                }
            }
            NonlinearityModel::CriticalCombo {
                kappa,
                lambda,
                mu,
                dim,
            } => {
                let crit = critical_exponent(*dim);
                kappa * s.powf(crit) / crit + lambda * s.powf(*mu) / mu
            }
            NonlinearityModel::ExponentialN2 { a1, a2 } => {
                a1 * expm1_minus_x(a2 * s * s) / (2.0 * a2)
            }
        }
    }

    /// `dg/ds (x, s)` for `s >= 0`.
    pub(crate) fn dg_ds(&self, x: Point, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match self {
            NonlinearityModel::PurePower { p } => (p - 1.0) * s.powf(p - 2.0),
            NonlinearityModel::SumOfPowers { exponents } => {
                exponents.iter().map(|p| (p - 1.0) * s.powf(p - 2.0)).sum()
            }
            NonlinearityModel::WeightedPower { mu, weight } => {
                let w = weight.spatial_factor(x);
                match *weight {
                    Weight::Affine { a3, a4, p } | Weight::SpatialAffine { a3, a4, p } => {
                        w * (a3 * (mu - 1.0) * s.powf(mu - 2.0) + a4 * (p - 1.0) * s.powf(p - 2.0))
                    }
                    Weight::Logarithmic { a3, a4 } => {
                        w * (a4 / (1.0 + s) * s.powf(mu - 1.0)
                            + (a3 + a4 * s.ln_1p()) * (mu - 1.0) * s.powf(mu - 2.0))
                    }
                }
            }
            NonlinearityModel::CriticalCombo {
                kappa,
                lambda,
                mu,
                dim,
            } => {
                let crit = critical_exponent(*dim);
                kappa * (crit - 1.0) * s.powf(crit - 2.0) + lambda * (mu - 1.0) * s.powf(mu - 2.0)
            }
            NonlinearityModel::ExponentialN2 { a1, a2 } => {
                let x2 = a2 * s * s;
                a1 * (x2.exp_m1() + 2.0 * x2 * x2.exp())
            }
        }
    }

    /// Largest `s` at which the model is still comfortably finite in `f64`.
    pub fn safe_amplitude(&self) -> f64 {
        match self {
            NonlinearityModel::ExponentialN2 { a2, .. } => (300.0 / a2).sqrt(),
            _ => 1e3,
        }
    }
}

/// `2* = 2N/(N-2)` for `N >= 3`.
pub fn critical_exponent(dim: u32) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 2.0)
}

/// Worst-case slacks of the structural inequalities over a sample set.
///
/// Slacks are normalized by `1 + |lhs| + |rhs|` so one tolerance applies to
/// every magnitude; a negative slack is a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// min over samples of `mu G(x, s)` (must stay strictly positive).
    pub ar_positivity_min: f64,
    /// min normalized slack of `mu G <= s g`.
    pub ar_upper: f64,
    /// min normalized slack of `g(x, ts) <= t^(mu-1) g(x, s)`, `t in (0, 1]`.
    pub sub_scaling: f64,
    /// min normalized slack of `g(x, ts) >= t^(mu-1) g(x, s)`, `t >= 1`.
    pub super_scaling: f64,
    /// min normalized increment of `s -> g / s^(mu-1)` along sorted samples.
    pub ratio_monotone: f64,
    /// min normalized increment of `s -> s g / mu - G` along sorted samples.
    pub ar_monotone: f64,
    /// `g(x, s) > 0` for every sample.
    pub positivity_ok: bool,
    /// `g(x, 0) == 0` for every sampled x.
    pub vanishes_at_zero: bool,
    /// Number of `(x, s, t)` and `(x, s)` evaluations behind the report.
    pub samples: usize,
}

impl StructureReport {
    pub fn worst_slack(&self) -> f64 {
        [
            self.ar_upper,
            self.sub_scaling,
            self.super_scaling,
            self.ratio_monotone,
            self.ar_monotone,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.positivity_ok
            && self.vanishes_at_zero
            && self.ar_positivity_min > 0.0
            && self.worst_slack() >= -tol
    }
}

fn normalized(slack: f64, a: f64, b: f64) -> f64 {
    slack / (1.0 + a.abs() + b.abs())
}

/// Evaluates the structural inequalities on the given samples.
///
/// `ts` may mix values in `(0, 1]` and `[1, inf)`; each inequality uses the
/// half it applies to.
pub fn check_structure(
    model: &NonlinearityModel,
    sample_xs: &[Point],
    sample_ss: &[f64],
    sample_ts: &[f64],
) -> StructureReport {
    let mu = model.mu();
    let mut report = StructureReport {
        ar_positivity_min: f64::INFINITY,
        ar_upper: f64::INFINITY,
        sub_scaling: f64::INFINITY,
        super_scaling: f64::INFINITY,
        ratio_monotone: f64::INFINITY,
        ar_monotone: f64::INFINITY,
        positivity_ok: true,
        vanishes_at_zero: true,
        samples: 0,
    };
    let mut sorted: Vec<f64> = sample_ss.iter().copied().filter(|s| *s > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();

    for &x in sample_xs {
        if model.g(x, 0.0) != 0.0 {
            report.vanishes_at_zero = false;
        }
        let mut prev: Option<(f64, f64)> = None;
        for &s in &sorted {
            let g = model.g(x, s);
            let big_g = model.primitive(x, s);
            if !(g > 0.0) {
                report.positivity_ok = false;
            }
            let mu_g = mu * big_g;
            let sg = s * g;
            report.ar_positivity_min = report.ar_positivity_min.min(mu_g);
            report.ar_upper = report.ar_upper.min(normalized(sg - mu_g, sg, mu_g));

            let ratio = g / s.powf(mu - 1.0);
            let ar = sg / mu - big_g;
            if let Some((r0, a0)) = prev {
                report.ratio_monotone = report.ratio_monotone.min(normalized(ratio - r0, ratio, r0));
                report.ar_monotone = report.ar_monotone.min(normalized(ar - a0, sg / mu, big_g));
            }
            prev = Some((ratio, ar));

            for &t in sample_ts {
                if !(t > 0.0) {
                    continue;
                }
                let lhs = model.g(x, t * s);
                let rhs = t.powf(mu - 1.0) * g;
                if t <= 1.0 {
                    report.sub_scaling = report.sub_scaling.min(normalized(rhs - lhs, lhs, rhs));
                }
                if t >= 1.0 {
                    report.super_scaling = report.super_scaling.min(normalized(lhs - rhs, lhs, rhs));
                }
                report.samples += 1;
            }
            report.samples += 1;
        }
    }
    report
}

/// Geometric grid on `[lo, hi]` with `per_decade` points per factor of ten.
pub fn geometric_samples(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo);
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).ceil() as usize).max(1);
    (0..=n)
        .map(|k| lo * 10f64.powf(decades * k as f64 / n as f64))
        .collect()
}

/// Default dense sample set: 10^3 points per decade in `s`, scaling factors
/// on both sides of 1, and a few spatial points inside `[-1, 1]^2`.
pub fn default_structure_samples(model: &NonlinearityModel) -> (Vec<Point>, Vec<f64>, Vec<f64>) {
    let xs = vec![[0.0, 0.0], [0.5, -0.25], [-0.8, 0.6], [0.9, 0.9]];
    let hi = model.safe_amplitude().min(1e2);
    let ss = geometric_samples(1e-3, hi, 1000);
    let mut ts = geometric_samples(1e-2, 1.0, 8);
    ts.extend(geometric_samples(1.0, 10.0, 8).into_iter().skip(1));
    (xs, ss, ts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn catalog() -> Vec<NonlinearityModel> {
        vec![
            NonlinearityModel::PurePower { p: 4.0 },
            NonlinearityModel::SumOfPowers {
                exponents: vec![3.0, 4.0],
            },
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::Affine {
                    a3: 1.0,
                    a4: 0.5,
                    p: 4.0,
                },
            },
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::SpatialAffine {
                    a3: 1.0,
                    a4: 0.5,
                    p: 4.0,
                },
            },
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::Logarithmic { a3: 1.0, a4: 1.0 },
            },
            NonlinearityModel::CriticalCombo {
                kappa: 1.0,
                lambda: 2.0,
                mu: 3.0,
                dim: 3,
            },
            NonlinearityModel::ExponentialN2 { a1: 1.0, a2: 0.5 },
        ]
    }

    #[test]
    fn pointwise_values() {
        let pp = NonlinearityModel::PurePower { p: 4.0 };
        assert_eq!(pp.eval_g([0.0, 0.0], 2.0).unwrap(), 8.0);
        assert_eq!(pp.eval_G([0.0, 0.0], 2.0).unwrap(), 4.0);
        let sum = NonlinearityModel::SumOfPowers {
            exponents: vec![3.0, 4.0],
        };
        assert!((sum.eval_G([0.0, 0.0], 1.0).unwrap() - 7.0 / 12.0).abs() < 1e-15);
        let crit = NonlinearityModel::CriticalCombo {
            kappa: 1.0,
            lambda: 2.0,
            mu: 3.0,
            dim: 3,
        };
        assert_eq!(crit.eval_g([0.3, 0.0], 1.0).unwrap(), 3.0);
        for m in catalog() {
            assert_eq!(m.eval_g([0.1, 0.2], 0.0).unwrap(), 0.0);
            assert_eq!(m.eval_G([0.1, 0.2], 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn negative_argument_is_rejected() {
        for m in catalog() {
            assert_eq!(
                m.eval_g([0.0, 0.0], -0.5),
                Err(ModelError::NegativeArgument(-0.5))
            );
            assert!(m.eval_G([0.0, 0.0], -1e-300).is_err());
        }
    }

    #[test]
    fn catalog_validates() {
        for m in catalog() {
            m.validate().unwrap();
        }
        assert!(NonlinearityModel::PurePower { p: 2.0 }.validate().is_err());
        assert!(NonlinearityModel::CriticalCombo {
            kappa: 1.0,
            lambda: 1.0,
            mu: 6.0,
            dim: 3
        }
        .validate()
        .is_err());
        assert!(NonlinearityModel::WeightedPower {
            mu: 4.0,
            weight: Weight::Affine {
                a3: 1.0,
                a4: 1.0,
                p: 3.0
            }
        }
        .validate()
        .is_err());
    }

    #[test]
    fn primitive_differentiates_back() {
        let ss = geometric_samples(1e-2, 5.0, 20);
        for m in catalog() {
            for &x in &[[0.0, 0.0], [0.4, -0.7]] {
                for &s in &ss {
                    let h = 1e-5 * s.max(1e-2);
                    let d = (m.primitive(x, s + h) - m.primitive(x, s - h)) / (2.0 * h);
                    let g = m.g(x, s);
                    assert!(
                        (d - g).abs() <= 1e-6 * (1.0 + g.abs()),
                        "{m:?} s={s}: dG={d} g={g}"
                    );
                    let dd = (m.g(x, s + h) - m.g(x, s - h)) / (2.0 * h);
                    let dg = m.dg_ds(x, s);
                    assert!((dd - dg).abs() <= 1e-5 * (1.0 + dg.abs()), "{m:?} s={s}");
                }
            }
        }
    }

    #[test]
    fn pure_power_ar_equality() {
        let m = NonlinearityModel::PurePower { p: 4.0 };
        for s in geometric_samples(1e-3, 1e2, 50) {
            let sg = s * m.g([0.0, 0.0], s);
            let mu_g = 4.0 * m.primitive([0.0, 0.0], s);
            assert!((mu_g - sg).abs() <= 1e-14 * sg.abs());
        }
    }

    #[test]
    fn scaling_examples() {
        let m = NonlinearityModel::PurePower { p: 4.0 };
        let r = check_structure(&m, &[[0.0, 0.0]], &[1.0], &[0.5]);
        assert_eq!(r.sub_scaling, 0.0);
        assert_eq!(r.ar_upper, 0.0);
        // g(2) = 12 versus 2^2 (1 + 1) = 8: raw slack 4
        let sum = NonlinearityModel::SumOfPowers {
            exponents: vec![3.0, 4.0],
        };
        let r = check_structure(&sum, &[[0.0, 0.0]], &[1.0], &[2.0]);
        assert!((r.super_scaling - 4.0 / (1.0 + 12.0 + 8.0)).abs() < 1e-15);
    }

    #[test]
    fn catalog_passes_dense_structure_check() {
        for m in catalog() {
            let (xs, ss, ts) = default_structure_samples(&m);
            let r = check_structure(&m, &xs, &ss, &ts);
            assert!(r.samples >= 10_000);
            assert!(r.passes(1e-12), "{m:?}: {r:?}");
        }
    }

    #[test]
    fn log_weight_primitive_matches_closed_form() {
        // ∫_0^s t^2 ln(1+t) dt = s^3 ln(1+s)/3 - (s^3/3 - s^2/2 + s - ln(1+s))/3
        for s in [1e-3f64, 0.1, 1.0, 7.5, 100.0] {
            let exact = s.powi(3) * s.ln_1p() / 3.0 - (s.powi(3) / 3.0 - s * s / 2.0 + s - s.ln_1p()) / 3.0;
            let got = integrate_from_zero(&|t: f64| t * t * t.ln_1p(), s);
            assert!((got - exact).abs() <= 1e-14 * (1.0 + exact.abs()), "{s}: {got} vs {exact}");
        }
    }
}
