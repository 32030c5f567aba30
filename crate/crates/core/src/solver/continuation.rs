use std::f64::consts::PI;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, Grid, GridKind, PoissonSolver};
use crate::error::SolverError;
use crate::nonlinearity::NonlinearityModel;
use crate::regularization::{sharp_energy, RegularizedFunctional};

use super::mountain_pass::{make_endpoint, mountain_pass, MountainPassOptions, MountainPassPath};
use super::newton::{newton_continue, NewtonOptions};
use super::schedule::EpsSchedule;
use super::{relative_residual, sobolev_gradient};

/// Starting field with maximum 2: a product of sines on boxes, `cos` of the
/// scaled radius on disks and balls.
pub fn initial_guess(grid: &Grid) -> Field {
    match *grid.kind() {
        GridKind::Rect {
            x_range,
            y_range,
            disk_radius: None,
            ..
        } => grid.sample_admissible(|p| {
            let sx = (PI * (p[0] - x_range[0]) / (x_range[1] - x_range[0])).sin();
            let sy = (PI * (p[1] - y_range[0]) / (y_range[1] - y_range[0])).sin();
            2.0 * sx * sy
        }),
        GridKind::Rect {
            disk_radius: Some(r), ..
        } => grid.sample_admissible(|p| 2.0 * (0.5 * PI * p[0].hypot(p[1]) / r).cos().max(0.0)),
        GridKind::Radial { radius, .. } => grid.sample_admissible(|p| 2.0 * (0.5 * PI * p[0] / radius).cos()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Mountain pass followed by a Newton polish at the same ε.
    MountainPass,
    /// Newton warm-started from the previous ε.
    Newton,
    /// Newton failed; mountain pass at this ε along the ray through the
    /// previous solution.
    MountainPassFallback,
}

/// One row of the continuation trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsRecord {
    pub eps: f64,
    pub method: SolveMethod,
    /// `c_j = J_ε(u_j)`.
    pub level: f64,
    /// `J(u_j)`.
    pub sharp_energy: f64,
    /// `H⁻¹` norm of `dJ_ε(u_j)`.
    pub grad_norm: f64,
    /// Relative nodal residual of `u_j`.
    pub residual: f64,
    pub mountain_pass_sweeps: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub max_u: f64,
    pub min_u: f64,
    /// Seconds; kept out of serialized traces so reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<EpsRecord>,
    /// Critical points, one per record.
    #[serde(skip)]
    pub fields: Vec<Field>,
}

impl SolveTrace {
    pub fn last_field(&self) -> Option<&Field> {
        self.fields.last()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub schedule: EpsSchedule,
    pub mountain_pass: MountainPassOptions,
    pub newton: NewtonOptions,
    /// Gradient norm at which a mountain pass first hands over to Newton.
    /// Tightened tenfold after each failed polish, down to the mountain pass
    /// tolerance.
    pub handoff_tol: f64,
}

impl SolveOptions {
    pub fn for_grid(grid: &Grid) -> Result<Self, SolverError> {
        Ok(SolveOptions {
            schedule: EpsSchedule::for_spacing(grid.h())?,
            mountain_pass: MountainPassOptions::for_grid(grid),
            newton: NewtonOptions::default(),
            handoff_tol: 5e-3 * grid.volume().sqrt(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub trace: SolveTrace,
    /// Final deformed path of the last mountain pass run, with its ε.
    pub path: MountainPassPath,
    pub path_eps: f64,
}

struct Solved {
    u: Field,
    sweeps: usize,
    newton: usize,
    linear: usize,
    path: Option<MountainPassPath>,
}

fn run_mountain_pass(
    f: &RegularizedFunctional,
    start: &Field,
    opts: &SolveOptions,
) -> Result<Solved, SolverError> {
    let endpoint = make_endpoint(f, start)?;
    let mut path = MountainPassPath::straight(&endpoint, opts.mountain_pass.path_nodes);
    let target = opts.mountain_pass.tol;
    let mut stage = opts.handoff_tol.max(target);
    let mut sweeps = 0;
    loop {
        let mp_opts = MountainPassOptions {
            tol: stage,
            ..opts.mountain_pass.clone()
        };
        let mp = mountain_pass(f, path, &mp_opts)?;
        sweeps += mp.sweeps;
        let scale = mp.u.sup_norm();
        let polished = newton_continue(f, &mp.u, &opts.newton)
            .ok()
            .filter(|out| out.u.sup_distance(&mp.u) <= 0.1 * scale && accept(&out.u).is_ok());
        match polished {
            Some(out) => {
                return Ok(Solved {
                    u: out.u,
                    sweeps,
                    newton: out.iterations,
                    linear: out.linear_iterations,
                    path: Some(mp.path),
                })
            }
            None if stage <= target => {
                return Ok(Solved {
                    u: mp.u,
                    sweeps,
                    newton: 0,
                    linear: 0,
                    path: Some(mp.path),
                })
            }
            None => {
                stage = (0.1 * stage).max(target);
                path = mp.path;
            }
        }
    }
}

fn accept(u: &Field) -> Result<(), SolverError> {
    if !(u.max() > 1.0) {
        return Err(SolverError::Trivial("critical point never exceeds 1".into()));
    }
    if u.min() < -1e-12 {
        return Err(SolverError::Trivial(format!("critical point takes negative value {:e}", u.min())));
    }
    Ok(())
}

/// Mountain pass at the first ε, then Newton continuation down the schedule
/// with a fresh mountain pass whenever Newton fails or loses the branch.
pub fn solve(
    grid: &Grid,
    model: &NonlinearityModel,
    u0: &Field,
    opts: &SolveOptions,
) -> Result<SolveOutput, SolverError> {
    let eps = opts.schedule.values();
    let poisson = PoissonSolver::new(grid);
    let mut records = Vec::new();
    let mut fields: Vec<Field> = Vec::new();
    let mut last_path = None;
    for (j, &e) in eps.iter().enumerate() {
        let f = RegularizedFunctional::new(grid, model, e)?;
        let start = Instant::now();
        let (solved, method) = if j == 0 {
            (run_mountain_pass(&f, u0, opts)?, SolveMethod::MountainPass)
        } else {
            let warm = fields.last().unwrap();
            match newton_continue(&f, warm, &opts.newton).and_then(|out| accept(&out.u).map(|_| out)) {
                Ok(out) => (
                    Solved {
                        u: out.u,
                        sweeps: 0,
                        newton: out.iterations,
                        linear: out.linear_iterations,
                        path: None,
                    },
                    SolveMethod::Newton,
                ),
                Err(_) => (run_mountain_pass(&f, warm, opts)?, SolveMethod::MountainPassFallback),
            }
        };
        accept(&solved.u)?;
        let grad = sobolev_gradient(&f, &poisson, &solved.u);
        records.push(EpsRecord {
            eps: e,
            method,
            level: f.energy(&solved.u),
            sharp_energy: sharp_energy(grid, model, &solved.u),
            grad_norm: grad.norm,
            residual: relative_residual(grid, &grad.residual, &solved.u),
            mountain_pass_sweeps: solved.sweeps,
            newton_iterations: solved.newton,
            linear_iterations: solved.linear,
            max_u: solved.u.max(),
            min_u: solved.u.min(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        if let Some(p) = solved.path {
            last_path = Some((p, e));
        }
        fields.push(solved.u);
    }
    let (path, path_eps) = last_path.expect("first level always runs a mountain pass");
    Ok(SolveOutput {
        trace: SolveTrace { records, fields },
        path,
        path_eps,
    })
}
