use crate::discretization::{CompensatedSum, Field, Grid, PoissonSolver};
use crate::error::SolverError;
use crate::nonlinearity::NonlinearityModel;
use crate::regularization::{superlevel_volume, RegularizedFunctional};

use super::sobolev_gradient;

/// The pieces of the fibering map `φ_u(t) = J(u⁻ + t u⁺)` for `t > 0`, with
/// `u⁺ = (u - 1)₊` and `u⁻ = min(u, 1)`.
///
/// On the grid the Dirichlet form does not split exactly: edges crossing
/// level 1 couple `u⁻` and `u⁺`, so `φ_u` carries the extra term
/// `t D(u⁻, u⁺)`. That term is `O(h)` and is kept separately so the
/// continuum formula can be checked termwise.
#[derive(Debug, Clone)]
pub struct NehariTerms<'a> {
    grid: &'a Grid,
    model: &'a NonlinearityModel,
    pub plus: Field,
    pub minus: Field,
    /// `D(u⁺, u⁺)`, the discrete `∫ |∇u⁺|²`.
    pub dirichlet_plus: f64,
    /// `D(u⁻, u⁻)`.
    pub dirichlet_minus: f64,
    /// `D(u⁻, u⁺) ≥ 0`.
    pub cross: f64,
    /// `|{u > 1}|`.
    pub volume: f64,
}

impl<'a> NehariTerms<'a> {
    pub fn new(grid: &'a Grid, model: &'a NonlinearityModel, u: &[f64]) -> Self {
        let plus = Field::from_vec(u.iter().map(|v| (v - 1.0).max(0.0)).collect());
        let minus = Field::from_vec(u.iter().map(|v| v.min(1.0)).collect());
        NehariTerms {
            grid,
            model,
            dirichlet_plus: grid.dirichlet_form(&plus, &plus),
            dirichlet_minus: grid.dirichlet_form(&minus, &minus),
            cross: grid.dirichlet_form(&minus, &plus),
            volume: superlevel_volume(grid, u),
            plus,
            minus,
        }
    }

    /// `∫ u⁺ g(x, t u⁺)`.
    pub fn source(&self, t: f64) -> f64 {
        let w = self.grid.weights();
        (0..self.plus.len())
            .filter(|&k| self.plus[k] > 0.0)
            .map(|k| w[k] * self.plus[k] * self.model.g(self.grid.coords(k), t * self.plus[k]))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `∫ G(x, t u⁺)`.
    pub fn primitive(&self, t: f64) -> f64 {
        let w = self.grid.weights();
        (0..self.plus.len())
            .filter(|&k| self.plus[k] > 0.0)
            .map(|k| w[k] * self.model.primitive(self.grid.coords(k), t * self.plus[k]))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `t D(u⁺, u⁺) - ∫ u⁺ g(x, t u⁺)`.
    pub fn derivative(&self, t: f64) -> f64 {
        t * self.dirichlet_plus - self.source(t)
    }

    /// `½ ∫|∇u⁻|² + t²/2 ∫|∇u⁺|² - ∫ G(x, t u⁺) + |{u > 1}|`, the continuum
    /// fibering energy assembled from its terms.
    pub fn continuum_energy(&self, t: f64) -> f64 {
        0.5 * self.dirichlet_minus + 0.5 * t * t * self.dirichlet_plus - self.primitive(t) + self.volume
    }

    /// `J(u⁻ + t u⁺)` on the grid: the continuum form plus `t D(u⁻, u⁺)`.
    pub fn energy(&self, t: f64) -> f64 {
        self.continuum_energy(t) + t * self.cross
    }

    /// Interval for `t_u` from the scaling bounds: `t^(μ-2)` lies between
    /// `D(u⁺,u⁺) / ∫ u⁺ g(x, u⁺)` and 1.
    pub fn bracket(&self) -> Result<(f64, f64), SolverError> {
        self.check()?;
        let ratio = self.dirichlet_plus / self.source(1.0);
        let bound = ratio.powf(1.0 / (self.model.mu() - 2.0));
        Ok(if ratio <= 1.0 { (bound, 1.0) } else { (1.0, bound) })
    }

    fn check(&self) -> Result<(), SolverError> {
        if !(self.dirichlet_plus > 0.0) {
            return Err(SolverError::Precondition("u⁺ vanishes identically".into()));
        }
        if !(self.source(1.0) > 0.0) {
            return Err(SolverError::Precondition("∫ u⁺ g(x, u⁺) is not positive".into()));
        }
        Ok(())
    }

    /// Root of `t ↦ D(u⁺,u⁺) - ∫ u⁺ g(x, t u⁺) / t`, decreasing in `t`,
    /// inside [`bracket`](Self::bracket), by Illinois regula falsi with
    /// bisection safeguard to relative width 1e-14.
    pub fn root_time(&self) -> Result<f64, SolverError> {
        let (mut a, mut b) = self.bracket()?;
        let psi = |t: f64| self.dirichlet_plus - self.source(t) / t;
        let mut fa = psi(a);
        let mut fb = psi(b);
        let slack = 1e-12 * self.dirichlet_plus;
        if fa < -slack || fb > slack {
            return Err(SolverError::Structural(format!(
                "fibering derivative does not change sign on [{a}, {b}] ({fa:e}, {fb:e})"
            )));
        }
        if fa <= 0.0 {
            return Ok(a);
        }
        if fb >= 0.0 {
            return Ok(b);
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if b - a <= 1e-14 * b {
                break;
            }
            let mut c = (a * fb - b * fa) / (fb - fa);
            if !(c > a && c < b) {
                c = 0.5 * (a + b);
            }
            let fc = psi(c);
            if fc == 0.0 {
                return Ok(c);
            }
            if fc > 0.0 {
                a = c;
                fa = fc;
                if side == 1 {
                    fb *= 0.5;
                }
                side = 1;
            } else {
                b = c;
                fb = fc;
                if side == -1 {
                    fa *= 0.5;
                }
                side = -1;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// `t_u`, in closed form for pure powers and by root finding otherwise.
pub fn nehari_time(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<f64, SolverError> {
    let terms = NehariTerms::new(grid, model, u);
    if let NonlinearityModel::PurePower { p } = model {
        terms.check()?;
        let w = grid.weights();
        let moment: f64 = terms.plus.iter().zip(w).map(|(v, w)| w * v.powf(*p)).sum();
        return Ok((terms.dirichlet_plus / moment).powf(1.0 / (p - 2.0)));
    }
    terms.root_time()
}

/// `t_u` by root finding for every model.
pub fn nehari_time_root(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<f64, SolverError> {
    NehariTerms::new(grid, model, u).root_time()
}

pub fn nehari_bracket(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<(f64, f64), SolverError> {
    NehariTerms::new(grid, model, u).bracket()
}

/// `π(u) = u⁻ + t_u u⁺`.
pub fn project_nehari(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<Field, SolverError> {
    let t = nehari_time(grid, model, u)?;
    Ok(Field::from_vec(
        u.iter().map(|&v| if v > 1.0 { 1.0 + t * (v - 1.0) } else { v }).collect(),
    ))
}

/// `J(π(u))` assembled from the fibering terms at `t_u`.
pub fn projected_energy(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> Result<f64, SolverError> {
    let t = nehari_time(grid, model, u)?;
    Ok(NehariTerms::new(grid, model, u).energy(t))
}

/// `|D(u⁺,u⁺) - ∫ u⁺ g(x, u⁺)| / (D(u⁺,u⁺) + ∫ u⁺ g(x, u⁺))`; zero on `M`.
pub fn nehari_identity_residual(grid: &Grid, model: &NonlinearityModel, u: &[f64]) -> f64 {
    let terms = NehariTerms::new(grid, model, u);
    let s = terms.source(1.0);
    let denom = terms.dirichlet_plus + s;
    if denom == 0.0 {
        0.0
    } else {
        (terms.dirichlet_plus - s).abs() / denom
    }
}

#[derive(Debug, Clone)]
pub struct NehariOptions {
    /// Regularization used to build descent directions.
    pub eps: f64,
    pub max_iter: usize,
    /// Stop once an accepted step lowers `J` by less than this.
    pub min_decrease: f64,
}

impl NehariOptions {
    pub fn for_grid(grid: &Grid) -> Self {
        NehariOptions {
            eps: 2.0 * grid.h(),
            max_iter: 20_000,
            min_decrease: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NehariOutcome {
    pub u: Field,
    pub level: f64,
    pub iterations: usize,
    pub identity_residual: f64,
}

/// Projected descent for `J` on `M`: step along the `H¹₀` gradient of
/// `J_ε`, project back with `π`, and accept only if `J` decreases.
pub fn minimize_on_m(
    grid: &Grid,
    model: &NonlinearityModel,
    u_init: &Field,
    opts: &NehariOptions,
) -> Result<NehariOutcome, SolverError> {
    let f = RegularizedFunctional::new(grid, model, opts.eps)?;
    if !grid.is_admissible(u_init) {
        return Err(SolverError::Precondition("initial field is not admissible".into()));
    }
    let poisson = PoissonSolver::new(grid);
    let mut v = project_nehari(grid, model, u_init)?;
    let mut level = projected_energy(grid, model, &v)?;
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let grad = sobolev_gradient(&f, &poisson, &v);
        let mut accepted = None;
        while step >= 1e-12 {
            let trial = Field::from_vec(v.iter().zip(&grad.direction).map(|(a, d)| a - step * d).collect());
            if !(trial.max() > 1.0) {
                step *= 0.5;
                continue;
            }
            let projected = project_nehari(grid, model, &trial)?;
            let e = projected_energy(grid, model, &projected)?;
            if e < level {
                accepted = Some((projected, e));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((next, e)) => {
                let decrease = level - e;
                v = next;
                level = e;
                step = (2.0 * step).min(4.0);
                if decrease < opts.min_decrease {
                    break;
                }
            }
            None => break,
        }
    }
    let identity_residual = nehari_identity_residual(grid, model, &v);
    Ok(NehariOutcome {
        u: v,
        level,
        iterations,
        identity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Weight;
    use crate::regularization::eval_j;
    use crate::solver::initial_guess;

    fn models() -> Vec<NonlinearityModel> {
        vec![
            NonlinearityModel::PurePower { p: 4.0 },
            NonlinearityModel::SumOfPowers { exponents: vec![3.0, 4.0] },
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::Affine { a3: 1.0, a4: 0.5, p: 4.0 },
            },
            NonlinearityModel::WeightedPower {
                mu: 3.0,
                weight: Weight::Logarithmic { a3: 1.0, a4: 2.0 },
            },
            NonlinearityModel::ExponentialN2 { a1: 1.0, a2: 0.5 },
        ]
    }

    fn bumps(g: &Grid) -> Vec<Field> {
        let base = initial_guess(g);
        vec![
            base.scaled(1.5),
            base.scaled(3.0),
            g.sample_admissible(|p| 4.0 * (1.0 - p[0] * p[0]) * (1.0 - p[1] * p[1]) * (1.0 + 0.3 * p[0])),
        ]
    }

    #[test]
    fn closed_form_matches_root_finder() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        for p in [3.0, 4.0, 5.5] {
            let m = NonlinearityModel::PurePower { p };
            for u in bumps(&g) {
                let closed = nehari_time(&g, &m, &u).unwrap();
                let root = nehari_time_root(&g, &m, &u).unwrap();
                assert!((closed - root).abs() <= 1e-10 * closed, "p={p}: {closed} vs {root}");
            }
        }
    }

    #[test]
    fn ratio_one_quarter_gives_one_half() {
        // Rescale u⁺ so that D(u⁺,u⁺) / ∫(u⁺)⁴ = 2/8.
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        let m = NonlinearityModel::PurePower { p: 4.0 };
        let u = bumps(&g)[1].clone();
        let plus = Field::from_vec(u.iter().map(|v| (v - 1.0).max(0.0)).collect());
        let d = g.dirichlet_form(&plus, &plus);
        let q = g.integrate(&plus.iter().map(|v| v.powi(4)).collect::<Vec<_>>());
        let a = (4.0 * d / q).sqrt();
        let v = Field::from_vec(u.iter().map(|&x| if x > 1.0 { 1.0 + a * (x - 1.0) } else { x }).collect());
        let t = nehari_time(&g, &m, &v).unwrap();
        assert!((t - 0.5).abs() < 1e-12, "{t}");
    }

    #[test]
    fn scaling_bounds_contain_the_root() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        for m in models() {
            for u in bumps(&g) {
                let t = nehari_time(&g, &m, &u).unwrap();
                let (lo, hi) = nehari_bracket(&g, &m, &u).unwrap();
                assert!(lo * (1.0 - 1e-12) <= t && t <= hi * (1.0 + 1e-12), "{m:?}: {t} not in [{lo}, {hi}]");
                let terms = NehariTerms::new(&g, &m, &u);
                let ratio = terms.dirichlet_plus / terms.source(1.0);
                if ratio <= 1.0 {
                    let power = t.powf(m.mu() - 2.0);
                    assert!(ratio * (1.0 - 1e-10) <= power && power <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_is_idempotent_and_fixes_the_manifold() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        for m in models() {
            for u in bumps(&g) {
                let pu = project_nehari(&g, &m, &u).unwrap();
                let ppu = project_nehari(&g, &m, &pu).unwrap();
                assert!(pu.sup_distance(&ppu) <= 1e-10 * pu.sup_norm(), "{m:?}");
                assert!((nehari_time(&g, &m, &pu).unwrap() - 1.0).abs() <= 1e-10);
                assert!(nehari_identity_residual(&g, &m, &pu) <= 1e-12);
            }
        }
    }

    #[test]
    fn fibering_energy_matches_direct_evaluation() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        for m in models() {
            for u in bumps(&g) {
                let direct = eval_j(&g, &m, &project_nehari(&g, &m, &u).unwrap()).unwrap();
                let assembled = projected_energy(&g, &m, &u).unwrap();
                assert!((direct - assembled).abs() <= 1e-10 * direct.abs().max(1.0), "{direct} vs {assembled}");
                let terms = NehariTerms::new(&g, &m, &u);
                assert!(terms.cross >= 0.0);
            }
        }
    }

    #[test]
    fn rejects_fields_below_one() {
        let g = Grid::square(17, -1.0, 1.0).unwrap();
        let m = NonlinearityModel::PurePower { p: 4.0 };
        let u = initial_guess(&g).scaled(0.4);
        assert!(nehari_time(&g, &m, &u).is_err());
        assert!(project_nehari(&g, &m, &u).is_err());
    }

    #[test]
    fn minimizer_lies_on_the_manifold() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        for m in models().into_iter().take(3) {
            let u0 = initial_guess(&g);
            let start = projected_energy(&g, &m, &u0).unwrap();
            let out = minimize_on_m(&g, &m, &u0, &NehariOptions::for_grid(&g)).unwrap();
            assert!(out.identity_residual <= 1e-8);
            assert!(out.level > 0.0 && out.level <= start);
            assert!(out.u.max() > 1.0);
        }
    }
}
