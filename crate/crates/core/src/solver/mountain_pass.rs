use crate::discretization::{Field, Grid, PoissonSolver};
use crate::error::SolverError;
use crate::regularization::RegularizedFunctional;

use super::sobolev_gradient;

/// Number of fields stored along a mountain-pass path.
pub const PATH_NODES: usize = 32;

const ENDPOINT_DOUBLINGS: usize = 60;
const ARMIJO: f64 = 1e-4;
const MAX_STEP: f64 = 4.0;

/// Scales the part of `u0` above 1 until `J_ε` turns negative:
/// `u0⁻ + t u0⁺` with `t = 1, 2, 4, …`.
pub fn make_endpoint(f: &RegularizedFunctional, u0: &Field) -> Result<Field, SolverError> {
    let grid = f.grid();
    if u0.len() != grid.len() || !grid.is_admissible(u0) {
        return Err(SolverError::Precondition("initial field is not admissible".into()));
    }
    if !(u0.max() > 1.0) {
        return Err(SolverError::Precondition("initial field never exceeds 1".into()));
    }
    let mut t = 1.0;
    for _ in 0..=ENDPOINT_DOUBLINGS {
        let e = Field::from_vec(u0.iter().map(|&v| if v > 1.0 { 1.0 + t * (v - 1.0) } else { v }).collect());
        if f.energy(&e) < 0.0 {
            return Ok(e);
        }
        t *= 2.0;
    }
    Err(SolverError::EndpointNotFound {
        doublings: ENDPOINT_DOUBLINGS,
    })
}

/// Ordered fields from `0` to an endpoint of negative energy.
#[derive(Debug, Clone)]
pub struct MountainPassPath {
    fields: Vec<Field>,
}

impl MountainPassPath {
    /// `nodes` equally spaced fields on the segment from 0 to `endpoint`.
    pub fn straight(endpoint: &Field, nodes: usize) -> Self {
        let nodes = nodes.max(3);
        let fields = (0..nodes)
            .map(|i| endpoint.scaled(i as f64 / (nodes - 1) as f64))
            .collect();
        MountainPassPath { fields }
    }

    pub fn from_fields(fields: Vec<Field>) -> Result<Self, SolverError> {
        if fields.len() < 3 {
            return Err(SolverError::InvalidPath("a path needs at least 3 fields".into()));
        }
        let n = fields[0].len();
        if fields.iter().any(|f| f.len() != n) {
            return Err(SolverError::InvalidPath("fields differ in length".into()));
        }
        Ok(MountainPassPath { fields })
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn endpoint(&self) -> &Field {
        self.fields.last().unwrap()
    }

    pub fn energies(&self, f: &RegularizedFunctional) -> Vec<f64> {
        self.fields.iter().map(|u| f.energy(u)).collect()
    }

    fn check(&self, f: &RegularizedFunctional) -> Result<(), SolverError> {
        let grid = f.grid();
        if self.fields.iter().any(|u| u.len() != grid.len() || !grid.is_admissible(u)) {
            return Err(SolverError::InvalidPath("path contains an inadmissible field".into()));
        }
        if self.fields[0].iter().any(|v| *v != 0.0) {
            return Err(SolverError::InvalidPath("path must start at 0".into()));
        }
        let last = f.energy(self.endpoint());
        if !(last < 0.0) {
            return Err(SolverError::InvalidPath(format!("endpoint energy {last:e} is not negative")));
        }
        Ok(())
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct MountainPassOptions {
    /// Stop once the `H⁻¹` norm of `dJ_ε` at the path maximizer drops below.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Stagnation is declared when the level drops by less than
    /// `stagnation_decrease` over this many sweeps.
    pub stagnation_window: usize,
    pub stagnation_decrease: f64,
    pub path_nodes: usize,
}

impl MountainPassOptions {
    /// Gradient tolerance `1e-6 |Ω|^½`.
    pub fn for_grid(grid: &Grid) -> Self {
        MountainPassOptions {
            tol: 1e-6 * grid.volume().sqrt(),
            max_sweeps: 20_000,
            stagnation_window: 50,
            stagnation_decrease: 1e-14,
            path_nodes: PATH_NODES,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MountainPassOutcome {
    pub u: Field,
    pub level: f64,
    pub grad_norm: f64,
    pub sweeps: usize,
    /// Path maximum before each sweep; nonincreasing.
    pub levels: Vec<f64>,
    pub path: MountainPassPath,
}

/// The path `s ↦ s a` and the position of its maximum.
struct Ray {
    anchor: Field,
    peak: f64,
    level: f64,
}

impl Ray {
    fn point(&self, s: f64) -> Field {
        self.anchor.scaled(s)
    }

    /// The sampled path from 0 to the first doubling of the peak scale with
    /// negative energy.
    fn path(&self, f: &RegularizedFunctional, nodes: usize) -> Result<MountainPassPath, SolverError> {
        let top = negative_scale(f, &self.anchor, 2.0 * self.peak)?;
        Ok(MountainPassPath::straight(&self.point(top), nodes))
    }
}

/// `d/ds J_ε(s a) = Σ w_k r_k(s a) a_k`.
fn ray_slope(f: &RegularizedFunctional, anchor: &[f64], s: f64) -> f64 {
    let u: Vec<f64> = anchor.iter().map(|a| s * a).collect();
    let r = f.residual(&u);
    f.grid().inner(&r, anchor)
}

fn negative_scale(f: &RegularizedFunctional, anchor: &Field, start: f64) -> Result<f64, SolverError> {
    let mut top = start;
    for _ in 0..=ENDPOINT_DOUBLINGS {
        if f.energy(&anchor.scaled(top)) < 0.0 {
            return Ok(top);
        }
        top *= 2.0;
    }
    Err(SolverError::EndpointNotFound {
        doublings: ENDPOINT_DOUBLINGS,
    })
}

/// Root of the ray slope in `[a, b]` given `slope(a) > 0 > slope(b)`, by
/// Illinois regula falsi to relative width 1e-15.
fn slope_root(f: &RegularizedFunctional, anchor: &[f64], mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    let mut side = 0i8;
    for _ in 0..200 {
        if b - a <= 1e-15 * b {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !(c > a && c < b) {
            c = 0.5 * (a + b);
        }
        let fc = ray_slope(f, anchor, c);
        if fc == 0.0 {
            return c;
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
    0.5 * (a + b)
}

/// Samples `J_ε` at `nodes` points of the ray up to a scale of negative
/// energy and pins the sampled maximum by a sign change of the slope.
fn scan_peak(f: &RegularizedFunctional, anchor: Field, top: f64, nodes: usize) -> Result<Ray, SolverError> {
    let top = negative_scale(f, &anchor, top)?;
    let ds = top / (nodes - 1) as f64;
    let energies: Vec<f64> = (0..nodes).map(|i| f.energy(&anchor.scaled(i as f64 * ds))).collect();
    let i = argmax(&energies);
    if i == 0 || i == nodes - 1 {
        return Err(SolverError::InvalidPath("ray maximum sits at an endpoint".into()));
    }
    let (a, b) = ((i - 1) as f64 * ds, (i + 1) as f64 * ds);
    let fa = ray_slope(f, &anchor, a);
    let fb = ray_slope(f, &anchor, b);
    let peak = if fa > 0.0 && fb < 0.0 {
        slope_root(f, &anchor, a, b, fa, fb)
    } else {
        i as f64 * ds
    };
    let level = f.energy(&anchor.scaled(peak)).max(energies[i]);
    Ok(Ray { anchor, peak, level })
}

/// Maximum of `J_ε` along the ray nearest to the scale `guess`, bracketed
/// by geometric expansion of the slope sign change.
fn local_peak(f: &RegularizedFunctional, anchor: Field, guess: f64) -> Option<Ray> {
    const GROW: f64 = 1.1;
    let s0 = ray_slope(f, &anchor, guess);
    let (mut a, mut b, mut fa, mut fb) = (guess, guess, s0, s0);
    for _ in 0..200 {
        if fa > 0.0 && fb < 0.0 {
            break;
        }
        if fa <= 0.0 {
            b = a;
            fb = fa;
            a /= GROW;
            fa = ray_slope(f, &anchor, a);
        } else {
            a = b;
            fa = fb;
            b *= GROW;
            fb = ray_slope(f, &anchor, b);
        }
    }
    if !(fa > 0.0 && fb < 0.0) {
        return None;
    }
    let peak = slope_root(f, &anchor, a, b, fa, fb);
    let level = f.energy(&anchor.scaled(peak));
    Some(Ray { anchor, peak, level })
}

/// Min-max over rays: the path through the current field is `s ↦ s a`; its
/// maximizer is lowered along the `H¹₀` gradient of `J_ε`, the path is
/// rebuilt through the lowered field, and a step is accepted only if the
/// new path's maximum satisfies the Armijo condition against the old one.
///
/// At a ray maximizer the gradient is orthogonal to the ray, so the
/// iteration stops at a critical point of `J_ε` rather than at a kink of
/// the path.
pub fn mountain_pass(
    f: &RegularizedFunctional,
    path: MountainPassPath,
    opts: &MountainPassOptions,
) -> Result<MountainPassOutcome, SolverError> {
    path.check(f)?;
    let grid = f.grid();
    let poisson = PoissonSolver::new(grid);
    let nodes = opts.path_nodes.max(3);
    let energies = path.energies(f);
    let m = argmax(&energies);
    if m == 0 || m == path.len() - 1 {
        return Err(SolverError::InvalidPath("path maximum sits at an endpoint".into()));
    }
    let top = (path.len() - 1) as f64 / m as f64;
    let mut ray = scan_peak(f, path.fields[m].clone(), top, nodes)?;
    let mut levels = Vec::new();
    let mut step: f64 = 1.0;

    for sweep in 0..opts.max_sweeps {
        let level = ray.level;
        levels.push(level);
        let u = ray.point(ray.peak);
        let grad = sobolev_gradient(f, &poisson, &u);
        if grad.norm <= opts.tol {
            if !(u.max() > 1.0) {
                return Err(SolverError::Trivial("mountain-pass point never exceeds 1".into()));
            }
            return Ok(MountainPassOutcome {
                u,
                level,
                grad_norm: grad.norm,
                sweeps: sweep,
                levels,
                path: ray.path(f, nodes)?,
            });
        }
        let w = opts.stagnation_window;
        if levels.len() > w && levels[levels.len() - 1 - w] - level < opts.stagnation_decrease {
            return Err(SolverError::Stagnation {
                sweeps: sweep,
                grad_norm: grad.norm,
                level,
                best: Box::new(u),
            });
        }
        let slope = grad.norm * grad.norm;
        let mut next = None;
        while step >= 1e-14 {
            let trial = Field::from_vec(u.iter().zip(&grad.direction).map(|(a, d)| a - step * d).collect());
            if let Some(candidate) = local_peak(f, trial, 1.0) {
                if candidate.level <= level - ARMIJO * step * slope {
                    next = Some(candidate);
                    break;
                }
            }
            step *= 0.5;
        }
        match next {
            Some(candidate) => {
                ray = candidate;
                step = (2.0 * step).min(MAX_STEP);
            }
            None => {
                return Err(SolverError::Stagnation {
                    sweeps: sweep,
                    grad_norm: grad.norm,
                    level,
                    best: Box::new(u),
                })
            }
        }
    }
    let u = ray.point(ray.peak);
    let grad = sobolev_gradient(f, &poisson, &u);
    Err(SolverError::Stagnation {
        sweeps: opts.max_sweeps,
        grad_norm: grad.norm,
        level: ray.level,
        best: Box::new(u),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::NonlinearityModel;
    use crate::solver::{initial_guess, newton_continue, NewtonOptions};

    fn setup(n: usize) -> (Grid, NonlinearityModel) {
        (Grid::square(n, -1.0, 1.0).unwrap(), NonlinearityModel::PurePower { p: 4.0 })
    }

    #[test]
    fn endpoint_is_first_negative_doubling() {
        let (g, m) = setup(33);
        let f = RegularizedFunctional::new(&g, &m, 8.0 * g.h()).unwrap();
        let u0 = initial_guess(&g);
        let e = make_endpoint(&f, &u0).unwrap();
        assert!(f.eval_jeps(&e).unwrap() < 0.0);
        // independent scan of t ↦ J_ε(u0⁻ + t u0⁺) on a fine grid
        let at = |t: f64| {
            let v: Vec<f64> = u0.iter().map(|&x| x.min(1.0) + t * (x - 1.0).max(0.0)).collect();
            f.eval_jeps(&v).unwrap()
        };
        let first = (1..4000).map(|i| i as f64 * 0.01).find(|&t| at(t) < 0.0).unwrap();
        let doubled = (0..10).map(|k| 2f64.powi(k)).find(|&t| t >= first && at(t) < 0.0).unwrap();
        let expected: Vec<f64> = u0.iter().map(|&x| x.min(1.0) + doubled * (x - 1.0).max(0.0)).collect();
        assert!(e.iter().zip(&expected).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn endpoint_needs_values_above_one() {
        let (g, m) = setup(17);
        let f = RegularizedFunctional::new(&g, &m, 0.25).unwrap();
        assert!(matches!(
            make_endpoint(&f, &initial_guess(&g).scaled(0.5)),
            Err(SolverError::Precondition(_))
        ));
    }

    #[test]
    fn rejects_invalid_paths() {
        let (g, m) = setup(17);
        let f = RegularizedFunctional::new(&g, &m, 0.25).unwrap();
        let opts = MountainPassOptions::for_grid(&g);
        let short = MountainPassPath::straight(&initial_guess(&g), 8);
        assert!(matches!(mountain_pass(&f, short, &opts), Err(SolverError::InvalidPath(_))));
        let e = make_endpoint(&f, &initial_guess(&g)).unwrap();
        let mut fields = MountainPassPath::straight(&e, 8).fields().to_vec();
        fields[0] = initial_guess(&g).scaled(0.1);
        let shifted = MountainPassPath::from_fields(fields).unwrap();
        assert!(mountain_pass(&f, shifted, &opts).is_err());
    }

    #[test]
    fn mountain_pass_level_descends_to_a_critical_point() {
        let (g, m) = setup(65);
        let f = RegularizedFunctional::new(&g, &m, 8.0 * g.h()).unwrap();
        let opts = MountainPassOptions::for_grid(&g);
        let e = make_endpoint(&f, &initial_guess(&g)).unwrap();
        let out = mountain_pass(&f, MountainPassPath::straight(&e, PATH_NODES), &opts).unwrap();
        assert!(out.levels.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.level > 0.0);
        assert!(out.grad_norm <= opts.tol);
        assert!(out.u.max() > 1.0);
        assert_eq!(out.path.len(), PATH_NODES);
        let energies = out.path.energies(&f);
        assert!(energies[0] == 0.0 && *energies.last().unwrap() < 0.0);
        assert!(energies.iter().all(|&e| e <= out.level + 1e-9 * out.level));

        let polished = newton_continue(&f, &out.u, &NewtonOptions::default()).unwrap();
        assert!(polished.residual <= 1e-10);
        assert!(polished.u.sup_distance(&out.u) <= 0.1 * out.u.sup_norm());
    }
}
