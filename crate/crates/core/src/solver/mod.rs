//! Critical points of `J_ε`: mountain pass at the coarsest ε, Newton
//! continuation down the schedule, and the Nehari projection for `J`.

mod continuation;
mod mountain_pass;
mod nehari;
mod newton;
mod schedule;

pub use continuation::{initial_guess, solve, EpsRecord, SolveMethod, SolveOptions, SolveOutput, SolveTrace};
pub use mountain_pass::{make_endpoint, mountain_pass, MountainPassOptions, MountainPassOutcome, MountainPassPath, PATH_NODES};
pub use nehari::{
    minimize_on_m, nehari_bracket, nehari_identity_residual, nehari_time, nehari_time_root, project_nehari,
    projected_energy, NehariOptions, NehariOutcome, NehariTerms,
};
pub use newton::{newton_continue, NewtonOptions, NewtonOutcome};
pub use schedule::EpsSchedule;

use crate::discretization::{Field, Grid, PoissonSolver};
use crate::regularization::RegularizedFunctional;

/// `‖r‖ / (1 + ‖Δ_h u‖)` in the weighted `L²` norm: the residual measured
/// against the size of the operator term it balances.
pub fn relative_residual(grid: &Grid, r: &[f64], u: &[f64]) -> f64 {
    let lap = grid.laplacian_apply(u);
    grid.l2_norm(r) / (1.0 + grid.l2_norm(&lap))
}

/// Residual, its `H¹₀` Riesz representative and the dual norm.
pub(crate) struct Gradient {
    pub residual: Field,
    pub direction: Vec<f64>,
    /// `sqrt(⟨W r, K⁻¹ W r⟩)`, the `H⁻¹` norm of `dJ_ε`.
    pub norm: f64,
}

pub(crate) fn sobolev_gradient(f: &RegularizedFunctional, poisson: &PoissonSolver, u: &[f64]) -> Gradient {
    let grid = f.grid();
    let residual = f.residual(u);
    let wr: Vec<f64> = residual.iter().zip(grid.weights()).map(|(r, w)| r * w).collect();
    let direction = poisson.solve(&wr);
    let norm = wr.iter().zip(&direction).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
    Gradient {
        residual,
        direction,
        norm,
    }
}
