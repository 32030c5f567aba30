//! The transition bump, the sharp functional `J` and its regularization
//! `J_ε`, and the nodal residual of the regularized Euler-Lagrange equation.
//!
//! All three are assembled from the same stiffness edges and nodal weights,
//! so `dJ_ε/du_k = w_k r_k` holds exactly for the discrete objects.

use crate::discretization::{CompensatedSum, Field, Grid};
use crate::error::ConfigError;
use crate::nonlinearity::NonlinearityModel;

/// The polynomial bump `β(s) = 30 s²(1-s)²` on `[0, 1]` and its primitive
/// `B(s) = 10s³ - 15s⁴ + 6s⁵`, saturated to 0 and 1 outside.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Bump;

impl Bump {
    pub const MAX: f64 = 1.875;

    #[inline]
    pub fn beta(s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            let q = s * (1.0 - s);
            30.0 * q * q
        }
    }

    #[inline]
    pub fn primitive(s: f64) -> f64 {
        if s <= 0.0 {
            0.0
        } else if s >= 1.0 {
            1.0
        } else {
            s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
        }
    }

    /// `β'(s) = 60 s (1-s)(1-2s)`.
    #[inline]
    pub fn beta_prime(s: f64) -> f64 {
        if s <= 0.0 || s >= 1.0 {
            0.0
        } else {
            60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)
        }
    }

    /// `(β(s), B(s))`.
    pub fn eval(s: f64) -> (f64, f64) {
        (Self::beta(s), Self::primitive(s))
    }
}

fn check_pair(grid: &Grid, model: &NonlinearityModel) -> Result<(), ConfigError> {
    if let Some(dim) = model.required_dim() {
        if grid.dim() != dim {
            return Err(ConfigError::Mismatch(format!(
                "model needs an N = {dim} domain, grid represents N = {}",
                grid.dim()
            )));
        }
    }
    Ok(())
}

fn check_field(grid: &Grid, u: &[f64]) -> Result<(), ConfigError> {
    if u.len() != grid.len() {
        return Err(ConfigError::Mismatch(format!(
            "field has {} values, grid has {} nodes",
            u.len(),
            grid.len()
        )));
    }
    Ok(())
}

/// `J(u) = ∫ ½|∇u|² + χ{u>1} - G(x, (u-1)+)`, with `χ` evaluated by strict
/// nodewise comparison.
pub fn eval_j(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<f64, ConfigError> {
    check_pair(grid, model)?;
    check_field(grid, u)?;
    Ok(sharp_energy(grid, model, u))
}

pub(crate) fn sharp_energy(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> f64 {
    let dirichlet = 0.5 * grid.dirichlet_form(u, u);
    let w = grid.weights();
    let mut pot = CompensatedSum::default();
    for k in 0..u.len() {
        if w[k] == 0.0 {
            continue;
        }
        let v = u[k];
        if v > 1.0 {
            pot.add(w[k] * (1.0 - model.primitive(grid.coords(k), v - 1.0)));
        }
    }
    dirichlet + pot.value()
}

/// Measure of `{u > 1}` (strict, nodal).
pub fn superlevel_volume(grid: &Grid, u: &[f64]) -> f64 {
    grid.weights()
        .iter()
        .zip(u)
        .filter(|(_, v)| **v > 1.0)
        .map(|(w, _)| w)
        .sum()
}

/// Measure of `{lo < u < hi}` (nodal).
pub fn band_volume(grid: &Grid, u: &[f64], lo: f64, hi: f64) -> f64 {
    grid.weights()
        .iter()
        .zip(u)
        .filter(|(_, v)| **v > lo && **v < hi)
        .map(|(w, _)| w)
        .sum()
}

/// `J_ε` bound to a grid and model.
#[derive(Debug, Clone, Copy)]
pub struct RegularizedFunctional<'a> {
    grid: &'a Grid,
    model: &'a NonlinearityModel,
    eps: f64,
}

impl<'a> RegularizedFunctional<'a> {
    pub fn new(grid: &'a Grid, model: &'a NonlinearityModel, eps: f64) -> Result<Self, ConfigError> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(ConfigError::Parameter(format!("epsilon must be positive, got {eps}")));
        }
        check_pair(grid, model)?;
        Ok(RegularizedFunctional { grid, model, eps })
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn model(&self) -> &'a NonlinearityModel {
        self.model
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self, ConfigError> {
        Self::new(self.grid, self.model, eps)
    }

    /// `J_ε(u) = ∫ ½|∇u|² + B((u-1)/ε) - G(x, (u-1)+)`.
    pub fn eval_jeps(&self, u: &[f64]) -> Result<f64, ConfigError> {
        check_field(self.grid, u)?;
        Ok(self.energy(u))
    }

    pub(crate) fn energy(&self, u: &[f64]) -> f64 {
        let grid = self.grid;
        let dirichlet = 0.5 * grid.dirichlet_form(u, u);
        let w = grid.weights();
        let inv = 1.0 / self.eps;
        let mut pot = CompensatedSum::default();
        for k in 0..u.len() {
            let v = u[k];
            if w[k] == 0.0 || v <= 1.0 {
                continue;
            }
            pot.add(w[k] * (Bump::primitive((v - 1.0) * inv) - self.model.primitive(grid.coords(k), v - 1.0)));
        }
        dirichlet + pot.value()
    }

    /// The sharp functional on the same grid and model.
    pub fn eval_j(&self, u: &[f64]) -> Result<f64, ConfigError> {
        eval_j(self.grid, self.model, u)
    }

    /// Nodal residual `-Δ_h u + β((u-1)/ε)/ε - g(x, (u-1)+)` on interior
    /// nodes, zero on Dirichlet nodes. The directional derivative of `J_ε`
    /// along an admissible `v` is `Σ w_k r_k v_k`.
    pub fn residual_eq13(&self, u: &[f64]) -> Result<Field, ConfigError> {
        check_field(self.grid, u)?;
        Ok(self.residual(u))
    }

    pub(crate) fn residual(&self, u: &[f64]) -> Field {
        let grid = self.grid;
        let mut out = vec![0.0; u.len()];
        grid.stiffness_apply(u, &mut out);
        let w = grid.weights();
        let inv = 1.0 / self.eps;
        for k in 0..u.len() {
            if !grid.is_interior(k) {
                continue;
            }
            let mut r = out[k] / w[k];
            let v = u[k];
            if v > 1.0 {
                let s = v - 1.0;
                r += inv * Bump::beta(s * inv) - self.model.g(grid.coords(k), s);
            }
            out[k] = r;
        }
        Field::from_vec(out)
    }

    /// Diagonal of the linearized reaction term,
    /// `β'((u-1)/ε)/ε² - ∂_s g(x, (u-1)+)`, zero on Dirichlet nodes.
    pub fn reaction_derivative(&self, u: &[f64]) -> Field {
        let grid = self.grid;
        let inv = 1.0 / self.eps;
        Field::from_vec(
            (0..u.len())
                .map(|k| {
                    let v = u[k];
                    if !grid.is_interior(k) || v <= 1.0 {
                        0.0
                    } else {
                        let s = v - 1.0;
                        inv * inv * Bump::beta_prime(s * inv) - self.model.dg_ds(grid.coords(k), s)
                    }
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> NonlinearityModel {
        NonlinearityModel::PurePower { p: 4.0 }
    }

    #[test]
    fn bump_examples() {
        assert_eq!(Bump::eval(0.5), (1.875, 0.5));
        assert_eq!(Bump::eval(-3.0), (0.0, 0.0));
        assert_eq!(Bump::eval(2.0), (0.0, 1.0));
    }

    #[test]
    fn bump_invariants_on_dense_sample() {
        let n = 100_000;
        let mut prev_b = -1.0;
        let mut mass = 0.0;
        for k in 0..=n {
            let s = -0.5 + 2.0 * k as f64 / n as f64;
            let (b, big_b) = Bump::eval(s);
            assert!((0.0..=2.0).contains(&b));
            assert!(b * s <= 2.0);
            assert!(big_b >= prev_b);
            prev_b = big_b;
            if s > 0.0 && s < 1.0 {
                assert!(big_b > 0.0 && big_b < 1.0);
            }
        }
        // composite Simpson, error O(m^-4)
        let m = 1000;
        for k in 0..=m {
            let s = k as f64 / m as f64;
            let c = if k == 0 || k == m { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            mass += c * Bump::beta(s);
        }
        mass /= 3.0 * m as f64;
        assert!((mass - 1.0).abs() < 1e-11);
        let top = (0..=n).map(|k| Bump::beta(k as f64 / n as f64)).fold(0.0, f64::max);
        assert_eq!(top, Bump::MAX);
    }

    #[test]
    fn zero_field() {
        let g = Grid::square(17, -1.0, 1.0).unwrap();
        let m = model();
        let f = RegularizedFunctional::new(&g, &m, 0.1).unwrap();
        let u = g.zeros();
        assert_eq!(f.eval_jeps(&u).unwrap(), 0.0);
        assert_eq!(f.eval_j(&u).unwrap(), 0.0);
        assert_eq!(f.residual_eq13(&u).unwrap().sup_norm(), 0.0);
    }

    #[test]
    fn ties_at_one_do_not_count() {
        let g = Grid::square(17, -1.0, 1.0).unwrap();
        let m = model();
        let mut u = g.zeros();
        let c = 8 * 17 + 8;
        u[c] = 1.0;
        let j = eval_j(&g, &m, &u).unwrap();
        assert_eq!(j, 0.5 * g.dirichlet_form(&u, &u));
    }

    #[test]
    fn indicator_term_counts_cells() {
        // 5x5 node grid is below the minimum; use the smallest legal grid and
        // a single raised node
        let g = Grid::square(17, 0.0, 1.0).unwrap();
        let m = model();
        let mut u = g.zeros();
        let c = 8 * 17 + 8;
        let delta = 1e-3;
        u[c] = 1.0 + delta;
        let j = eval_j(&g, &m, &u).unwrap();
        let cells: f64 = (0..g.len()).filter(|&k| u[k] > 1.0).map(|k| g.weights()[k]).sum();
        let expected = 0.5 * g.dirichlet_form(&u, &u) + cells - m.primitive([0.5, 0.5], delta) * g.weights()[c];
        assert!((j - expected).abs() < 1e-15);
        assert_eq!(cells, g.h() * g.h());
    }

    #[test]
    fn saturated_bump_fills_the_domain() {
        let g = Grid::square(65, -1.0, 1.0).unwrap();
        let m = model();
        let eps = 0.05;
        let f = RegularizedFunctional::new(&g, &m, eps).unwrap();
        let u = g.sample_admissible(|_| 1.0 + eps);
        let b_term = f.eval_jeps(&u).unwrap() - 0.5 * g.dirichlet_form(&u, &u)
            + g.integrate(&g.sample_admissible(|_| m.primitive([0.0, 0.0], eps)));
        let interior: f64 = (0..g.len()).filter(|&k| g.is_interior(k)).map(|k| g.weights()[k]).sum();
        assert!((b_term - interior).abs() < 1e-12);
        assert!((b_term - 4.0).abs() < 4.0 * 2.0 * g.h());
    }

    #[test]
    fn harmonic_below_threshold_has_small_residual() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        let m = model();
        let f = RegularizedFunctional::new(&g, &m, 0.1).unwrap();
        // x^2 - y^2 is discrete-harmonic; shift into [0, 0.5]
        let u = g.sample_admissible(|p| 0.25 + 0.1 * (p[0] * p[0] - p[1] * p[1]));
        let r = f.residual_eq13(&u).unwrap();
        // only the nodes next to the Dirichlet boundary see the jump to 0
        for k in 0..g.len() {
            let p = g.coords(k);
            if g.is_interior(k) && p[0].abs() < 1.0 - 1.5 * g.h() && p[1].abs() < 1.0 - 1.5 * g.h() {
                assert!(r[k].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn critical_model_needs_three_dimensions() {
        let g = Grid::square(17, -1.0, 1.0).unwrap();
        let m = NonlinearityModel::CriticalCombo {
            kappa: 0.1,
            lambda: 1.0,
            mu: 3.0,
            dim: 3,
        };
        assert!(RegularizedFunctional::new(&g, &m, 0.1).is_err());
        let r = Grid::radial(3, 1.0, 33).unwrap();
        assert!(RegularizedFunctional::new(&r, &m, 0.1).is_ok());
        assert!(RegularizedFunctional::new(&r, &m, 0.0).is_err());
    }

    fn catalog() -> Vec<(Grid, NonlinearityModel)> {
        let sq = || Grid::square(17, -1.0, 1.0).unwrap();
        vec![
            (sq(), model()),
            (sq(), NonlinearityModel::SumOfPowers { exponents: vec![3.0, 4.0] }),
            (
                sq(),
                NonlinearityModel::WeightedPower {
                    mu: 3.0,
                    weight: crate::nonlinearity::Weight::SpatialAffine { a3: 1.0, a4: 0.5, p: 4.0 },
                },
            ),
            (
                Grid::radial(3, 1.0, 33).unwrap(),
                NonlinearityModel::CriticalCombo {
                    kappa: 0.1,
                    lambda: 1.0,
                    mu: 3.0,
                    dim: 3,
                },
            ),
            (sq(), NonlinearityModel::ExponentialN2 { a1: 1.0, a2: 0.5 }),
        ]
    }

    fn random_field(g: &Grid, rng: &mut ChaCha8Rng, hi: f64) -> Field {
        let mut u = Field::from_vec((0..g.len()).map(|_| rng.gen_range(0.0..hi)).collect());
        g.apply_mask(&mut u);
        u
    }

    #[test]
    fn central_differences_match_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let step = 1e-5;
        for (g, m) in catalog() {
            let f = RegularizedFunctional::new(&g, &m, 0.25).unwrap();
            for _ in 0..24 {
                let u = random_field(&g, &mut rng, 2.5);
                let v = random_field(&g, &mut rng, 1.0);
                let plus = f.eval_jeps(&u.axpy(step, &v)).unwrap();
                let minus = f.eval_jeps(&u.axpy(-step, &v)).unwrap();
                let fd = (plus - minus) / (2.0 * step);
                let exact = g.inner(&f.residual_eq13(&u).unwrap(), &v);
                let err = (fd - exact).abs() / exact.abs().max(1e-3);
                assert!(err <= 1e-6, "{m:?}: fd {fd} vs {exact}");
            }
        }
    }

    proptest! {
        #[test]
        fn regularized_energy_is_sandwiched(seed in any::<u64>(), eps in 0.01f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (g, m) in catalog() {
                let f = RegularizedFunctional::new(&g, &m, eps).unwrap();
                let u = random_field(&g, &mut rng, 1.0 + 3.0 * eps);
                let je = f.eval_jeps(&u).unwrap();
                let j = f.eval_j(&u).unwrap();
                let band = band_volume(&g, &u, 1.0, 1.0 + eps);
                let slack = 1e-12 * (1.0 + j.abs());
                prop_assert!(je <= j + slack);
                prop_assert!(j <= je + band + slack);
            }
        }
    }
}
