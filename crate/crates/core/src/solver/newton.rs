use crate::discretization::{linsolve, Field, PoissonSolver};
use crate::error::SolverError;
use crate::regularization::RegularizedFunctional;

use super::relative_residual;

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Target for [`relative_residual`](super::relative_residual).
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            max_iter: 100,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub u: Field,
    pub iterations: usize,
    pub residual: f64,
    pub linear_iterations: usize,
}

fn merit(f: &RegularizedFunctional, r: &[f64]) -> f64 {
    0.5 * f.grid().inner(r, r)
}

/// Damped Newton on the nodal residual of `J_ε`, starting from `warm`.
///
/// Each step solves `(K + W diag(c)) δ = -W r` by preconditioned MINRES,
/// `c = β'((u-1)/ε)/ε² - ∂_s g`, and backtracks on `½ ‖r‖²`.
pub fn newton_continue(
    f: &RegularizedFunctional,
    warm: &Field,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome, SolverError> {
    let grid = f.grid();
    if warm.len() != grid.len() || !grid.is_admissible(warm) {
        return Err(SolverError::Precondition("warm start is not admissible".into()));
    }
    let poisson = PoissonSolver::new(grid);
    let w = grid.weights();
    let mut u = warm.clone();
    let mut r = f.residual(&u);
    let mut res = relative_residual(grid, &r, &u);
    let mut phi = merit(f, &r);
    let mut linear_iterations = 0;

    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(NewtonOutcome {
                u,
                iterations: it,
                residual: res,
                linear_iterations,
            });
        }
        let c = f.reaction_derivative(&u);
        let rhs: Vec<f64> = r.iter().zip(w).map(|(a, b)| -a * b).collect();
        let apply = |x: &[f64], out: &mut [f64]| {
            grid.stiffness_apply(x, out);
            for k in 0..out.len() {
                if grid.is_interior(k) {
                    out[k] += w[k] * c[k] * x[k];
                }
            }
        };
        let precond = |x: &[f64], z: &mut [f64]| z.copy_from_slice(&poisson.solve(x));
        let mut delta = vec![0.0; grid.len()];
        let forcing = (0.1 * res).clamp(1e-13, 1e-4);
        let outcome = match linsolve::minres(apply, precond, &rhs, &mut delta, forcing, 2000) {
            Ok(o) => o,
            Err(SolverError::LinearNonConvergence { iterations, residual }) => {
                return Err(SolverError::Continuation {
                    iterations: it,
                    residual: res,
                    reason: format!("Jacobian solve failed after {iterations} iterations ({residual:.3e})"),
                })
            }
            Err(e) => return Err(e),
        };
        linear_iterations += outcome.iterations;

        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = Field::from_vec(u.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect());
            let rt = f.residual(&trial);
            let pt = merit(f, &rt);
            if pt.is_finite() && pt <= (1.0 - 1e-4 * alpha) * phi {
                u = trial;
                r = rt;
                phi = pt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolverError::Continuation {
                iterations: it,
                residual: res,
                reason: "line search found no decrease".into(),
            });
        }
        res = relative_residual(grid, &r, &u);
    }
    if res <= opts.tol {
        return Ok(NewtonOutcome {
            u,
            iterations: opts.max_iter,
            residual: res,
            linear_iterations,
        });
    }
    Err(SolverError::Continuation {
        iterations: opts.max_iter,
        residual: res,
        reason: "iteration limit reached".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::Grid;
    use crate::nonlinearity::NonlinearityModel;
    use crate::solver::{solve, initial_guess, SolveOptions};

    #[test]
    fn converged_field_is_a_fixed_point() {
        let g = Grid::square(33, -1.0, 1.0).unwrap();
        let m = NonlinearityModel::PurePower { p: 4.0 };
        let mut opts = SolveOptions::for_grid(&g).unwrap();
        opts.schedule = crate::solver::EpsSchedule::new(vec![8.0 * g.h()]).unwrap();
        let out = solve(&g, &m, &initial_guess(&g), &opts).unwrap();
        let u = out.trace.last_field().unwrap();
        let f = RegularizedFunctional::new(&g, &m, 8.0 * g.h()).unwrap();
        let again = newton_continue(&f, u, &NewtonOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(&again.u, u);
        assert!(again.residual <= 1e-10);
    }

    #[test]
    fn rejects_inadmissible_start() {
        let g = Grid::square(17, -1.0, 1.0).unwrap();
        let m = NonlinearityModel::PurePower { p: 4.0 };
        let f = RegularizedFunctional::new(&g, &m, 0.25).unwrap();
        let bad = g.sample(|_| 2.0);
        assert!(matches!(
            newton_continue(&f, &bad, &NewtonOptions::default()),
            Err(SolverError::Precondition(_))
        ));
    }
}
