//! Grids, fields, discrete operators and linear solvers.

mod field;
mod grid;
pub mod io;
pub mod linsolve;
mod poisson;

pub use field::{CompensatedSum, Field, VectorField};
pub use grid::{sphere_area, Grid, GridKind, MIN_NODES};
pub use poisson::PoissonSolver;

use crate::error::SolverError;

/// Operator `-Δ_h + diag(shift)` with zero Dirichlet data.
#[derive(Debug, Clone, Default)]
pub struct ShiftedLaplacian {
    /// Nonnegative nodal shift; `None` means plain `-Δ_h`.
    pub shift: Option<Field>,
}

/// Solves `(-Δ_h + shift) u = rhs` by preconditioned conjugate gradients to
/// relative residual `tol` (measured on the weighted system `K + W shift`).
pub fn linear_solve(
    grid: &Grid,
    op: &ShiftedLaplacian,
    rhs: &[f64],
    tol: f64,
) -> Result<Field, SolverError> {
    if let Some(s) = &op.shift {
        if s.len() != grid.len() || s.iter().any(|v| !(*v >= 0.0)) {
            return Err(SolverError::Precondition(
                "shift must be a nonnegative field on the grid".into(),
            ));
        }
    }
    let w = grid.weights();
    let mut b: Vec<f64> = rhs.iter().zip(w).map(|(f, w)| f * w).collect();
    grid.apply_mask(&mut b);
    let apply = |x: &[f64], out: &mut [f64]| {
        grid.stiffness_apply(x, out);
        if let Some(s) = &op.shift {
            for k in 0..out.len() {
                if grid.is_interior(k) {
                    out[k] += w[k] * s[k] * x[k];
                }
            }
        }
    };
    let poisson = PoissonSolver::new(grid);
    let precond = |r: &[f64], z: &mut [f64]| z.copy_from_slice(&poisson.solve(r));
    let mut x = vec![0.0; grid.len()];
    linsolve::conjugate_gradient(apply, precond, &b, &mut x, tol, 10 * grid.len())?;
    Ok(Field::from_vec(x))
}
