//! Measurable diagnostics of a solved trace: the free-boundary condition,
//! nondegeneracy, density, the domain-variation identity, energy
//! convergence, Lipschitz bounds and auxiliary maximum-principle checks.

use serde::{Deserialize, Serialize};

use crate::discretization::{linear_solve, CompensatedSum, Field, Grid, GridKind, ShiftedLaplacian};
use crate::error::{ModelError, SolverError};
use crate::freeboundary::{distance_to_sublevel, extract_free_boundary, DistanceMethod, FreeBoundary};
use crate::nonlinearity::{NonlinearityModel, Point};
use crate::regularization::{band_volume, sharp_energy, Bump, RegularizedFunctional};

pub const SCHEMA_VERSION: u32 = 1;

/// Verdict thresholds; the defaults are recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest admissible median `|α² - β² - 2|`.
    pub fb_median: f64,
    /// Lower bound for the empirical nondegeneracy constant.
    pub nondegeneracy_c_min: f64,
    /// Density fractions must lie in `[c, 1 - c]`.
    pub density_c_min: f64,
    /// Sampling radius cap in grid spacings.
    pub r0_cells: f64,
    /// Largest admissible `|res(Φ)| / (‖r‖ ‖Φ‖_C¹)`.
    pub variational_ratio: f64,
    /// Last sup-gradient over the median sup-gradient.
    pub lipschitz_growth: f64,
    /// Largest admissible `‖Δ_h u‖_∞` on the interior of `{u ≤ 1}`.
    pub harmonic_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            fb_median: 0.25,
            nondegeneracy_c_min: 0.05,
            density_c_min: 0.05,
            r0_cells: 10.0,
            variational_ratio: 10.0,
            lipschitz_growth: 1.2,
            harmonic_tol: 1e-6,
        }
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    sorted[((sorted.len() - 1) as f64 * q).round() as usize]
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbConditionMetrics {
    pub points: usize,
    /// Points whose one-sided samples would leave the domain.
    pub skipped: usize,
    pub median_abs: f64,
    pub median: f64,
    pub iqr: f64,
    /// 90th percentile of `|α² - β² - 2|`.
    pub worst_decile: f64,
    /// No usable boundary point.
    pub trivial: bool,
}

/// Statistics of `α² - β² - 2` over the extracted boundary points.
pub fn check_fb_condition(grid: &Grid, u: &[f64]) -> FbConditionMetrics {
    fb_condition(&extract_free_boundary(grid, u))
}

fn fb_condition(fb: &FreeBoundary) -> FbConditionMetrics {
    let defects = fb.jump_defects();
    let skipped = fb.points.len() - defects.len();
    if defects.is_empty() {
        return FbConditionMetrics {
            points: 0,
            skipped,
            median_abs: 0.0,
            median: 0.0,
            iqr: 0.0,
            worst_decile: 0.0,
            trivial: true,
        };
    }
    let abs = sorted(defects.iter().map(|d| d.abs()).collect());
    let signed = sorted(defects);
    FbConditionMetrics {
        points: signed.len(),
        skipped,
        median_abs: quantile(&abs, 0.5),
        median: quantile(&signed, 0.5),
        iqr: quantile(&signed, 0.75) - quantile(&signed, 0.25),
        worst_decile: quantile(&abs, 0.9),
        trivial: false,
    }
}

/// Distance from `p` to the reconstructed free boundary.
fn distance_to_boundary_set(fb: &FreeBoundary, p: Point, radial: bool) -> f64 {
    if radial {
        let r = p[0].hypot(p[1]);
        return fb.radii().iter().map(|s| (r - s).abs()).fold(f64::INFINITY, f64::min);
    }
    fb.segments
        .iter()
        .map(|s| {
            let d = [s.b[0] - s.a[0], s.b[1] - s.a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let t = if len2 > 0.0 {
                (((p[0] - s.a[0]) * d[0] + (p[1] - s.a[1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (p[0] - s.a[0] - t * d[0]).hypot(p[1] - s.a[1] - t * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NondegeneracyMetrics {
    /// `min (u(x₀) - 1) / dist(x₀, {u ≤ 1})`; `None` without samples.
    pub c: Option<f64>,
    pub samples: usize,
    pub r0: f64,
}

/// Empirical nondegeneracy constant over nodes of `{u > 1}` within `r0` of
/// the free boundary. The distance is measured to the piecewise-linear
/// reconstruction of `∂{u > 1}`, not to the nearest sublevel node, which
/// would overestimate it by up to `h` right next to the boundary.
pub fn check_nondegeneracy(grid: &Grid, u: &[f64], r0: f64) -> NondegeneracyMetrics {
    let fb = extract_free_boundary(grid, u);
    let node_dist = distance_to_sublevel(grid, u, DistanceMethod::Exact);
    let slack = 2.0 * grid.spacing().0.max(grid.spacing().1);
    let mut c: Option<f64> = None;
    let mut samples = 0;
    for k in 0..grid.len() {
        if !(u[k] > 1.0) || !grid.is_interior(k) || node_dist.values[k] > r0 + slack {
            continue;
        }
        let r = distance_to_boundary_set(&fb, grid.coords(k), grid.is_radial());
        if !(r > 0.0 && r <= r0) {
            continue;
        }
        samples += 1;
        let ratio = (u[k] - 1.0) / r;
        c = Some(c.map_or(ratio, |m| m.min(ratio)));
    }
    NondegeneracyMetrics { c, samples, r0 }
}

/// Density sampling radii `{4h, 8h, 16h, 32h}` capped at `r0`.
pub fn density_radii(grid: &Grid, r0: f64) -> Vec<f64> {
    let h = grid.h();
    let mut radii: Vec<f64> = [4.0, 8.0, 16.0, 32.0].iter().map(|k| (k * h).min(r0)).collect();
    radii.dedup();
    radii
}

/// `(#{nodes in B_r(p) with u > 1}, #{nodes in B_r(p)})` on a box grid.
pub fn ball_counts(grid: &Grid, u: &[f64], p: Point, r: f64) -> (usize, usize) {
    let GridKind::Rect {
        nx, ny, x_range, y_range, ..
    } = *grid.kind()
    else {
        return (0, 0);
    };
    let (hx, hy) = grid.spacing();
    let lo = |c: f64, o: f64, h: f64| (((c - r - o) / h).floor().max(0.0)) as usize;
    let hi = |c: f64, o: f64, h: f64, n: usize| ((((c + r - o) / h).ceil()) as usize).min(n - 1);
    let (mut inside, mut total) = (0, 0);
    for j in lo(p[1], y_range[0], hy)..=hi(p[1], y_range[0], hy, ny) {
        for i in lo(p[0], x_range[0], hx)..=hi(p[0], x_range[0], hx, nx) {
            let k = j * nx + i;
            let q = grid.coords(k);
            if (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2) <= r * r {
                total += 1;
                if u[k] > 1.0 {
                    inside += 1;
                }
            }
        }
    }
    (inside, total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub radius: f64,
    pub balls: usize,
    /// Balls leaving the domain.
    pub skipped: usize,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMetrics {
    pub rows: Vec<DensityRow>,
    pub min_fraction: f64,
    pub max_fraction: f64,
}

/// Cell-counted fractions `|{u > 1} ∩ B_r| / |B_r|` centred at the boundary
/// points. `None` on radial grids, where balls off the centre are not
/// represented.
pub fn check_density(grid: &Grid, u: &[f64], r0: f64) -> Option<DensityMetrics> {
    if grid.is_radial() {
        return None;
    }
    let fb = extract_free_boundary(grid, u);
    let mut rows = Vec::new();
    for r in density_radii(grid, r0) {
        let mut row = DensityRow {
            radius: r,
            balls: 0,
            skipped: 0,
            min_fraction: 1.0,
            max_fraction: 0.0,
        };
        for p in &fb.points {
            if grid.distance_to_boundary(p.position) < r {
                row.skipped += 1;
                continue;
            }
            let (inside, total) = ball_counts(grid, u, p.position, r);
            let f = inside as f64 / total as f64;
            row.balls += 1;
            row.min_fraction = row.min_fraction.min(f);
            row.max_fraction = row.max_fraction.max(f);
        }
        rows.push(row);
    }
    let used: Vec<&DensityRow> = rows.iter().filter(|r| r.balls > 0).collect();
    if used.is_empty() {
        return Some(DensityMetrics {
            rows,
            min_fraction: 0.0,
            max_fraction: 0.0,
        });
    }
    let min_fraction = used.iter().map(|r| r.min_fraction).fold(1.0, f64::min);
    let max_fraction = used.iter().map(|r| r.max_fraction).fold(0.0, f64::max);
    Some(DensityMetrics {
        rows,
        min_fraction,
        max_fraction,
    })
}

/// Compactly supported test vector fields for domain variations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestField {
    /// `ψ ξ₁^px ξ₂^py e_component` in coordinates normalized to the box (or
    /// disk), with `ψ` a cubic cutoff vanishing on the boundary.
    Planar { component: usize, px: u32, py: u32 },
    /// `φ(r) x / r` with `φ = r (1 - ρ²)³ ρ^(2 power)`, `ρ = r / R`.
    Radial { power: u32 },
}

/// Value and Jacobian `DΦ[i][j] = ∂_j Φ_i` at a point.
struct FieldValue {
    phi: [f64; 2],
    jac: [[f64; 2]; 2],
}

impl TestField {
    pub fn catalog(grid: &Grid) -> Vec<TestField> {
        if grid.is_radial() {
            return (0..8).map(|power| TestField::Radial { power }).collect();
        }
        [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 0, 1), (0, 0, 1), (1, 1, 0), (0, 1, 1), (1, 2, 0)]
            .iter()
            .map(|&(component, px, py)| TestField::Planar { component, px, py })
            .collect()
    }

    pub fn name(&self) -> String {
        match self {
            TestField::Planar { component, px, py } => format!("planar_e{}_x{}y{}", component + 1, px, py),
            TestField::Radial { power } => format!("radial_rho{}", 2 * power),
        }
    }

    fn eval(&self, grid: &Grid, p: Point) -> FieldValue {
        match (*self, grid.kind()) {
            (
                TestField::Planar { component, px, py },
                GridKind::Rect {
                    x_range,
                    y_range,
                    disk_radius,
                    ..
                },
            ) => {
                let c = [0.5 * (x_range[0] + x_range[1]), 0.5 * (y_range[0] + y_range[1])];
                let a = match disk_radius {
                    Some(r) => [*r, *r],
                    None => [0.5 * (x_range[1] - x_range[0]), 0.5 * (y_range[1] - y_range[0])],
                };
                let xi = [(p[0] - c[0]) / a[0], (p[1] - c[1]) / a[1]];
                let (psi, dpsi) = if disk_radius.is_some() {
                    let s = 1.0 - xi[0] * xi[0] - xi[1] * xi[1];
                    if s <= 0.0 {
                        (0.0, [0.0, 0.0])
                    } else {
                        (s.powi(3), [-6.0 * s * s * xi[0], -6.0 * s * s * xi[1]])
                    }
                } else {
                    let (sx, sy) = (1.0 - xi[0] * xi[0], 1.0 - xi[1] * xi[1]);
                    let s = sx * sy;
                    (s.powi(3), [-6.0 * s * s * xi[0] * sy, -6.0 * s * s * sx * xi[1]])
                };
                let pw = |x: f64, n: u32| if n == 0 { 1.0 } else { x.powi(n as i32) };
                let dpw = |x: f64, n: u32| if n == 0 { 0.0 } else { n as f64 * pw(x, n - 1) };
                let m = pw(xi[0], px) * pw(xi[1], py);
                let dm = [dpw(xi[0], px) * pw(xi[1], py), pw(xi[0], px) * dpw(xi[1], py)];
                let mut phi = [0.0; 2];
                let mut jac = [[0.0; 2]; 2];
                phi[component] = psi * m;
                for j in 0..2 {
                    jac[component][j] = (dpsi[j] * m + psi * dm[j]) / a[j];
                }
                FieldValue { phi, jac }
            }
            (TestField::Radial { power }, GridKind::Radial { radius, .. }) => {
                // radial profile only: phi = [φ, 0], jac = [[φ', 0], [0, φ / r]]
                let rho = p[0] / radius;
                let s = 1.0 - rho * rho;
                let k = power as i32;
                let q = s.powi(3) * rho.powi(2 * k);
                let dq = -6.0 * rho * s * s * rho.powi(2 * k)
                    + if k > 0 { 2.0 * k as f64 * s.powi(3) * rho.powi(2 * k - 1) } else { 0.0 };
                let phi_r = p[0] * q;
                let dphi = q + rho * dq;
                FieldValue {
                    phi: [phi_r, 0.0],
                    jac: [[dphi, 0.0], [0.0, q]],
                }
            }
            _ => FieldValue {
                phi: [0.0; 2],
                jac: [[0.0; 2]; 2],
            },
        }
    }

    /// Divergence of the field, with the `N - 1` angular directions of a
    /// radial field counted through `φ / r`.
    fn divergence(&self, grid: &Grid, v: &FieldValue) -> f64 {
        match self {
            TestField::Planar { .. } => v.jac[0][0] + v.jac[1][1],
            TestField::Radial { .. } => v.jac[0][0] + (grid.dim() - 1) as f64 * v.jac[1][1],
        }
    }

    /// `max |Φ| + max |DΦ|` over the grid nodes.
    pub fn c1_norm(&self, grid: &Grid) -> f64 {
        let (mut m0, mut m1) = (0.0f64, 0.0f64);
        for k in 0..grid.len() {
            let v = self.eval(grid, grid.coords(k));
            m0 = m0.max(v.phi[0].hypot(v.phi[1]));
            for row in v.jac {
                for d in row {
                    m1 = m1.max(d.abs());
                }
            }
        }
        m0 + m1
    }
}

/// Potential term of the energy density: `B((u-1)/ε)` or `χ_{u>1}`.
fn layer_term(s: f64, eps: Option<f64>) -> f64 {
    match eps {
        _ if s <= 0.0 => 0.0,
        Some(e) => Bump::primitive(s / e),
        None => 1.0,
    }
}

/// `∫ [(½|∇u|² + B((u-1)/ε) - G) div Φ - ∇u · DΦ ∇u]`, or the sharp version
/// with `χ_{u>1}` when `eps` is `None`. Centred gradients, nodal quadrature.
pub fn variational_residual(
    grid: &Grid,
    model: &NonlinearityModel,
    u: &[f64],
    field: &TestField,
    eps: Option<f64>,
) -> f64 {
    let grad = grid.gradient_field(u);
    let w = grid.weights();
    let mut sum = CompensatedSum::default();
    for k in 0..grid.len() {
        if w[k] == 0.0 {
            continue;
        }
        let x = grid.coords(k);
        let v = field.eval(grid, x);
        let div = field.divergence(grid, &v);
        let gu = grad[k];
        let s = u[k] - 1.0;
        let g = if s > 0.0 { model.primitive(x, s) } else { 0.0 };
        let density = 0.5 * (gu[0] * gu[0] + gu[1] * gu[1]) + layer_term(s, eps) - g;
        let dg = [
            v.jac[0][0] * gu[0] + v.jac[0][1] * gu[1],
            v.jac[1][0] * gu[0] + v.jac[1][1] * gu[1],
        ];
        sum.add(w[k] * (density * div - (gu[0] * dg[0] + gu[1] * dg[1])));
    }
    sum.value()
}

/// `-Δ_c u + β((u-1)/ε)/ε - g(x, (u-1)₊)` with the wide centred Laplacian
/// `Δ_c = div_c ∇_c`, the operator the identity's quadrature integrates
/// against; zero on Dirichlet nodes.
pub fn defect_residual(grid: &Grid, model: &NonlinearityModel, u: &[f64], eps: Option<f64>) -> Field {
    let grad = grid.gradient_field(u);
    let gx: Vec<f64> = grad.iter().map(|v| v[0]).collect();
    let dgx = grid.gradient_field(&gx);
    let lap: Vec<f64> = match grid.kind() {
        GridKind::Rect { .. } => {
            let gy: Vec<f64> = grad.iter().map(|v| v[1]).collect();
            let dgy = grid.gradient_field(&gy);
            (0..grid.len()).map(|k| dgx[k][0] + dgy[k][1]).collect()
        }
        GridKind::Radial { dim, .. } => (0..grid.len())
            .map(|k| {
                let r = grid.coords(k)[0];
                if k == 0 {
                    *dim as f64 * dgx[0][0]
                } else {
                    dgx[k][0] + (*dim - 1) as f64 * gx[k] / r
                }
            })
            .collect(),
    };
    Field::from_vec(
        (0..grid.len())
            .map(|k| {
                if !grid.is_interior(k) {
                    return 0.0;
                }
                let s = u[k] - 1.0;
                let mut r = -lap[k];
                if s > 0.0 {
                    if let Some(e) = eps {
                        r += Bump::beta(s / e) / e;
                    }
                    r -= model.g(grid.coords(k), s);
                }
                r
            })
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalRow {
    pub field: String,
    pub c1_norm: f64,
    /// Identity with `B((u-1)/ε)`.
    pub regularized: f64,
    /// Identity with `χ_{u>1}`.
    pub sharp: f64,
    /// `|regularized| / (‖r_c‖ ‖Φ‖_C¹)`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalMetrics {
    pub eps: f64,
    /// Weighted `L²` norm of [`defect_residual`].
    pub defect_norm: f64,
    pub rows: Vec<VariationalRow>,
    pub max_ratio: f64,
    pub max_sharp: f64,
}

pub fn check_variational_identity(
    grid: &Grid,
    model: &NonlinearityModel,
    u: &[f64],
    eps: f64,
    fields: &[TestField],
) -> VariationalMetrics {
    let defect_norm = grid.l2_norm(&defect_residual(grid, model, u, Some(eps)));
    let rows: Vec<VariationalRow> = fields
        .iter()
        .map(|f| {
            let c1 = f.c1_norm(grid);
            let regularized = variational_residual(grid, model, u, f, Some(eps));
            let scale = defect_norm * c1;
            VariationalRow {
                field: f.name(),
                c1_norm: c1,
                regularized,
                sharp: variational_residual(grid, model, u, f, None),
                ratio: if scale > 0.0 { regularized.abs() / scale } else { 0.0 },
            }
        })
        .collect();
    VariationalMetrics {
        eps,
        defect_norm,
        max_ratio: rows.iter().map(|r| r.ratio).fold(0.0, f64::max),
        max_sharp: rows.iter().map(|r| r.sharp.abs()).fold(0.0, f64::max),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub eps: f64,
    /// `J_ε(u_ε)`.
    pub regularized: f64,
    /// `J(u_ε)`.
    pub sharp: f64,
    /// `|{1 < u_ε < 1 + ε}|`.
    pub transition_band: f64,
    /// `|{|u_ε - 1| ≤ h}|`, the stand-in for `|{u = 1}|`.
    pub tie_band: f64,
    /// `0 ≤ J(u_ε) - J_ε(u_ε) ≤ |{1 < u_ε < 1 + ε}|`.
    pub pointwise_ok: bool,
    /// `J(u) - δ ≤ J_ε(u_ε) ≤ J(u) + |{|u - 1| ≤ h}| + δ` for the limit
    /// candidate `u`.
    pub sandwich_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMetrics {
    pub rows: Vec<EnergyRow>,
    /// `J` of the last field, the limit candidate.
    pub limit_sharp: f64,
    /// Three times the indicator quadrature error bound `½ h |F(u)|`.
    pub delta: f64,
    pub limit_level: f64,
    pub nehari_level: Option<f64>,
    /// `|c_m - inf_M J| / |inf_M J|`.
    pub nehari_gap: Option<f64>,
    pub pass: bool,
}

/// Free-boundary measure: polyline length, or sphere area on radial grids.
fn boundary_measure(grid: &Grid, fb: &FreeBoundary) -> f64 {
    if grid.is_radial() {
        let area = crate::discretization::sphere_area(grid.dim());
        fb.radii().iter().map(|r| area * r.powi(grid.dim() as i32 - 1)).sum()
    } else {
        fb.length()
    }
}

pub fn check_energy_convergence(
    grid: &Grid,
    model: &NonlinearityModel,
    levels: &[(f64, Field)],
    nehari_level: Option<f64>,
) -> Result<EnergyMetrics, SolverError> {
    let h = grid.h();
    let Some((_, limit)) = levels.last() else {
        return Err(SolverError::Precondition("no levels to check".into()));
    };
    let limit_sharp = sharp_energy(grid, model, limit);
    let limit_tie = band_volume(grid, limit, 1.0 - h, 1.0 + h) + tie_nodes(grid, limit);
    let delta = 3.0 * 0.5 * h * boundary_measure(grid, &extract_free_boundary(grid, limit));
    let mut rows = Vec::new();
    for (eps, u) in levels {
        let f = RegularizedFunctional::new(grid, model, *eps)?;
        let regularized = f.energy(u);
        let sharp = sharp_energy(grid, model, u);
        let transition_band = band_volume(grid, u, 1.0, 1.0 + eps);
        let slack = 1e-12 * (1.0 + sharp.abs());
        let gap = sharp - regularized;
        rows.push(EnergyRow {
            eps: *eps,
            regularized,
            sharp,
            transition_band,
            tie_band: band_volume(grid, u, 1.0 - h, 1.0 + h) + tie_nodes(grid, u),
            pointwise_ok: gap >= -slack && gap <= transition_band + slack,
            sandwich_ok: limit_sharp - delta - slack <= regularized
                && regularized <= limit_sharp + limit_tie + delta + slack,
        });
    }
    let limit_level = rows.last().unwrap().regularized;
    let nehari_gap = nehari_level.map(|m| (limit_level - m).abs() / m.abs());
    Ok(EnergyMetrics {
        pass: rows.iter().all(|r| r.pointwise_ok && r.sandwich_ok),
        rows,
        limit_sharp,
        delta,
        limit_level,
        nehari_level,
        nehari_gap,
    })
}

/// Weight of nodes sitting exactly at `1 ± h`, which the open band misses.
fn tie_nodes(grid: &Grid, u: &[f64]) -> f64 {
    let h = grid.h();
    grid.weights()
        .iter()
        .zip(u)
        .filter(|(_, v)| (**v - 1.0).abs() == h)
        .map(|(w, _)| w)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzMetrics {
    /// Smallest distance from `{u ≥ 1}` to `∂Ω` over all fields.
    pub delta0: f64,
    /// `(ε, sup |∇_h u_ε|)` over nodes at distance `≥ δ₀/2` from `∂Ω`.
    pub rows: Vec<(f64, f64)>,
    pub pass: bool,
}

pub fn check_lipschitz(grid: &Grid, levels: &[(f64, Field)], growth: f64) -> LipschitzMetrics {
    let mut delta0 = f64::INFINITY;
    for (_, u) in levels {
        for k in 0..grid.len() {
            if u[k] >= 1.0 {
                delta0 = delta0.min(grid.distance_to_boundary(grid.coords(k)));
            }
        }
    }
    if !delta0.is_finite() {
        delta0 = 0.0;
    }
    let rows: Vec<(f64, f64)> = levels
        .iter()
        .map(|(eps, u)| {
            let grad = grid.gradient_field(u);
            let sup = (0..grid.len())
                .filter(|&k| grid.is_interior(k) && grid.distance_to_boundary(grid.coords(k)) >= 0.5 * delta0)
                .map(|k| grad[k][0].hypot(grad[k][1]))
                .fold(0.0, f64::max);
            (*eps, sup)
        })
        .collect();
    let pass = match rows.last() {
        None => true,
        Some(&(_, last)) => {
            let med = quantile(&sorted(rows.iter().map(|r| r.1).collect()), 0.5);
            last <= growth * med
        }
    };
    LipschitzMetrics { delta0, rows, pass }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxMetrics {
    /// `‖Δ_h u‖_∞` over interior nodes at distance `≥ 2h` from `{u ≥ 1}`.
    pub harmonic_residual: f64,
    /// `min ring-average((u-1)₊) / r` over boundary points and radii;
    /// `None` on radial grids or without admissible rings.
    pub ring_nu: Option<f64>,
    pub min_u: f64,
    /// `A₀ = max |g(x, (u-1)₊)|` over the nodes.
    pub majorant_source: f64,
    /// `max (u - φ₀)` with `-Δ_h φ₀ = A₀`.
    pub majorant_excess: f64,
    pub pass_positive: bool,
    pub pass_majorant: bool,
}

const RING_SAMPLES: usize = 64;

/// Mean of `(u - 1)₊` over the circle of radius `r` about `p`, by
/// `RING_SAMPLES` equally spaced bilinear samples; `None` if the circle
/// leaves the domain.
pub fn ring_average(grid: &Grid, u: &[f64], p: Point, r: f64) -> Option<f64> {
    if grid.distance_to_boundary(p) < r {
        return None;
    }
    let mut sum = 0.0;
    for i in 0..RING_SAMPLES {
        let t = std::f64::consts::TAU * i as f64 / RING_SAMPLES as f64;
        let v = grid.interpolate(u, [p[0] + r * t.cos(), p[1] + r * t.sin()])?;
        sum += (v - 1.0).max(0.0);
    }
    Some(sum / RING_SAMPLES as f64)
}

pub fn check_aux(grid: &Grid, model: &NonlinearityModel, u: &[f64], r0: f64) -> Result<AuxMetrics, SolverError> {
    let h = grid.h();
    // distance to {u ≥ 1} is the distance to the sublevel set of 2 - u
    let mirrored: Vec<f64> = u.iter().map(|v| 2.0 - v).collect();
    let far = distance_to_sublevel(grid, &mirrored, DistanceMethod::Exact);
    let lap = grid.laplacian_apply(u);
    let harmonic_residual = (0..grid.len())
        .filter(|&k| grid.is_interior(k) && u[k] < 1.0 && far.values[k] >= 2.0 * h)
        .map(|k| lap[k].abs())
        .fold(0.0, f64::max);

    let ring_nu = if grid.is_radial() {
        None
    } else {
        let fb = extract_free_boundary(grid, u);
        let radii = density_radii(grid, r0);
        fb.points
            .iter()
            .flat_map(|p| radii.iter().filter_map(move |&r| ring_average(grid, u, p.position, r).map(|a| a / r)))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.min(v))))
    };

    let a0 = (0..grid.len())
        .filter(|&k| grid.is_interior(k) && u[k] > 1.0)
        .map(|k| model.g(grid.coords(k), u[k] - 1.0).abs())
        .fold(0.0, f64::max);
    let phi0 = linear_solve(grid, &ShiftedLaplacian::default(), &grid.sample(|_| a0), 1e-13)?;
    let majorant_excess = (0..grid.len())
        .map(|k| u[k] - phi0[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let min_u = u.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(AuxMetrics {
        harmonic_residual,
        ring_nu,
        min_u,
        majorant_source: a0,
        majorant_excess,
        pass_positive: min_u >= -1e-12,
        pass_majorant: majorant_excess <= 1e-9 * (1.0 + phi0.sup_norm()),
    })
}

/// Best constant `S_N` of `‖∇u‖₂² ≥ S ‖u‖²_{2*}` in `R^N`:
/// `π N (N - 2) (Γ(N/2) / Γ(N))^(2/N)`.
pub fn sobolev_constant(n: u32) -> Result<f64, ModelError> {
    if n < 3 {
        return Err(ModelError::InvalidParameters(format!(
            "the Sobolev constant needs N ≥ 3, got {n}"
        )));
    }
    let nf = n as f64;
    Ok(std::f64::consts::PI * nf * (nf - 2.0) * (libm::tgamma(nf / 2.0) / libm::tgamma(nf)).powf(2.0 / nf))
}

/// Level below which compactness holds for the critical model:
/// `S^(N/2) / (N κ^(N/2 - 1))`.
pub fn critical_threshold(n: u32, kappa: f64) -> Result<f64, ModelError> {
    if !(kappa > 0.0) {
        return Err(ModelError::InvalidParameters("κ must be positive".into()));
    }
    let s = sobolev_constant(n)?;
    let half = n as f64 / 2.0;
    Ok(s.powf(half) / (n as f64 * kappa.powf(half - 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCheck {
    pub threshold: f64,
    pub level: f64,
    pub pass: bool,
    /// Outermost free-boundary crossing radius, also in grid cells.
    pub boundary_radius: Option<f64>,
    pub boundary_radius_cells: Option<f64>,
    /// `D(s, s) / ‖s‖²_{2*}` for `s = (u - 1)₊`. Every `H¹₀` function has a
    /// quotient of at least `S`; a discrete solution below it concentrates
    /// beneath the grid scale, where nodal quadrature undercuts the
    /// continuum inequality.
    pub sobolev_quotient: Option<f64>,
    pub sobolev_constant: f64,
    pub resolved: bool,
}

/// Sobolev quotient of `(u - 1)₊` with exponent `2* = 2N/(N-2)`.
pub fn sobolev_quotient(grid: &Grid, u: &[f64]) -> Option<f64> {
    let n = grid.dim() as f64;
    if n < 3.0 {
        return None;
    }
    let crit = 2.0 * n / (n - 2.0);
    let s: Vec<f64> = u.iter().map(|v| (v - 1.0).max(0.0)).collect();
    let mut sum = CompensatedSum::default();
    for (w, v) in grid.weights().iter().zip(&s) {
        sum.add(w * v.powf(crit));
    }
    let norm = sum.value().powf(2.0 / crit);
    (norm > 0.0).then(|| grid.dirichlet_form(&s, &s) / norm)
}

fn critical_check(grid: &Grid, u: &[f64], dim: u32, kappa: f64, level: f64) -> Result<CriticalCheck, SolverError> {
    let threshold = critical_threshold(dim, kappa)?;
    let s = sobolev_constant(dim)?;
    let radius = extract_free_boundary(grid, u).radii().into_iter().reduce(f64::max);
    let quotient = sobolev_quotient(grid, u);
    Ok(CriticalCheck {
        threshold,
        level,
        pass: level < threshold,
        boundary_radius: radius,
        boundary_radius_cells: radius.map(|r| r / grid.h()),
        sobolev_quotient: quotient,
        sobolev_constant: s,
        resolved: quotient.is_some_and(|q| q >= s),
    })
}

/// `None` marks a check that does not apply to the grid or model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub fb_condition: bool,
    pub nondegeneracy: bool,
    pub density: Option<bool>,
    pub variational_bound: bool,
    pub variational_trend: Option<bool>,
    pub energy: bool,
    pub lipschitz: bool,
    pub harmonic: bool,
    pub positivity: bool,
    pub majorant: bool,
    pub critical_level: Option<bool>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        let required = [
            self.fb_condition,
            self.nondegeneracy,
            self.variational_bound,
            self.energy,
            self.lipschitz,
            self.harmonic,
            self.positivity,
            self.majorant,
        ];
        let optional = [self.density, self.variational_trend, self.critical_level];
        required.iter().all(|&v| v) && optional.iter().all(|v| v.unwrap_or(true))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub thresholds: Thresholds,
    pub eps: Vec<f64>,
    pub fb_condition: FbConditionMetrics,
    pub nondegeneracy: NondegeneracyMetrics,
    pub density: Option<DensityMetrics>,
    pub variational: Vec<VariationalMetrics>,
    pub energy: EnergyMetrics,
    pub lipschitz: LipschitzMetrics,
    pub aux: AuxMetrics,
    pub critical: Option<CriticalCheck>,
    pub verdicts: Verdicts,
    pub passed: bool,
}

/// Runs every check on the continuation levels `(ε_j, u_j)`; the last one
/// is the limit candidate.
pub fn verify(
    grid: &Grid,
    model: &NonlinearityModel,
    levels: &[(f64, Field)],
    nehari_level: Option<f64>,
    thresholds: &Thresholds,
) -> Result<VerificationReport, SolverError> {
    let Some((last_eps, u)) = levels.last() else {
        return Err(SolverError::Precondition("no levels to verify".into()));
    };
    let r0 = thresholds.r0_cells * grid.spacing().0.max(grid.spacing().1);
    let fb_condition = check_fb_condition(grid, u);
    let nondegeneracy = check_nondegeneracy(grid, u, r0);
    let density = check_density(grid, u, r0);
    let fields = TestField::catalog(grid);
    let variational: Vec<VariationalMetrics> = levels
        .iter()
        .map(|(eps, v)| check_variational_identity(grid, model, v, *eps, &fields))
        .collect();
    let energy = check_energy_convergence(grid, model, levels, nehari_level)?;
    let lipschitz = check_lipschitz(grid, levels, thresholds.lipschitz_growth);
    let aux = check_aux(grid, model, u, r0)?;
    let critical = match model {
        NonlinearityModel::CriticalCombo { kappa, dim, .. } => {
            let level = RegularizedFunctional::new(grid, model, *last_eps)?.energy(u);
            Some(critical_check(grid, u, *dim, *kappa, level)?)
        }
        _ => None,
    };
    let c_min = thresholds.density_c_min;
    let verdicts = Verdicts {
        fb_condition: !fb_condition.trivial && fb_condition.median_abs <= thresholds.fb_median,
        nondegeneracy: nondegeneracy.c.is_some_and(|c| c >= thresholds.nondegeneracy_c_min),
        density: density.as_ref().map(|d| {
            d.rows.iter().any(|r| r.balls > 0) && d.min_fraction >= c_min && d.max_fraction <= 1.0 - c_min
        }),
        variational_bound: variational.iter().all(|v| v.max_ratio <= thresholds.variational_ratio),
        variational_trend: (variational.len() >= 2).then(|| {
            let n = variational.len();
            variational[n - 1].max_sharp < variational[n - 2].max_sharp
        }),
        energy: energy.pass,
        lipschitz: lipschitz.pass,
        harmonic: aux.harmonic_residual <= thresholds.harmonic_tol,
        positivity: aux.pass_positive,
        majorant: aux.pass_majorant,
        critical_level: critical.as_ref().map(|c| c.pass),
    };
    Ok(VerificationReport {
        schema_version: SCHEMA_VERSION,
        thresholds: thresholds.clone(),
        eps: levels.iter().map(|l| l.0).collect(),
        fb_condition,
        nondegeneracy,
        density,
        variational,
        energy,
        lipschitz,
        aux,
        critical,
        passed: verdicts.all_pass(),
        verdicts,
    })
}
