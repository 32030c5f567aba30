//! The free boundary `∂{u > 1}`: extraction, one-sided gradients and the
//! distance to the sublevel set.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discretization::{Field, Grid, GridKind};
use crate::nonlinearity::Point;

/// Distances, in multiples of the spacing, at which `u` is sampled on each
/// side of the boundary. Starting at `2h` keeps the samples clear of the
/// transition layer `{1 < u < 1 + ε}` for the default `ε ≥ 2h` schedule.
pub const SAMPLE_OFFSETS: [f64; 3] = [2.0, 3.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }
}

/// `|∇u⁺|` and `|∇u⁻|` estimated at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub alpha: f64,
    pub beta: f64,
}

impl OneSided {
    /// `α² - β² - 2`, zero when the free-boundary condition holds.
    pub fn jump_defect(&self) -> f64 {
        self.alpha * self.alpha - self.beta * self.beta - 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub position: Point,
    /// Unit normal pointing into `{u > 1}`.
    pub normal: Point,
    /// `None` when a sample would leave the domain.
    pub gradients: Option<OneSided>,
}

/// Level-1 contour of a nodal field.
///
/// On box grids `segments` are the marching-squares pieces, oriented with
/// `{u > 1}` on the left, and `points` are the distinct edge crossings. On
/// radial grids there are no segments and each point is a crossing radius
/// `[r, 0]` with normal `[±1, 0]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub segments: Vec<Segment>,
    pub points: Vec<BoundaryPoint>,
}

impl FreeBoundary {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Crossing radii of a radial field.
    pub fn radii(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.position[0].hypot(p.position[1])).collect()
    }

    pub fn jump_defects(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter_map(|p| p.gradients.map(|g| g.jump_defect()))
            .collect()
    }

    /// `x,y` per vertex, two vertices per segment, segments separated by a
    /// blank line.
    pub fn polyline_csv(&self, config_hash: Option<&str>) -> String {
        let mut s = header(config_hash);
        s.push_str("x,y\n");
        for seg in &self.segments {
            let _ = writeln!(s, "{:?},{:?}\n{:?},{:?}\n", seg.a[0], seg.a[1], seg.b[0], seg.b[1]);
        }
        s
    }

    /// One row per boundary point; gradient columns are empty when skipped.
    pub fn normals_csv(&self, config_hash: Option<&str>) -> String {
        let mut s = header(config_hash);
        s.push_str("x,y,nx,ny,alpha,beta\n");
        for p in &self.points {
            let _ = write!(s, "{:?},{:?},{:?},{:?},", p.position[0], p.position[1], p.normal[0], p.normal[1]);
            match p.gradients {
                Some(g) => {
                    let _ = writeln!(s, "{:?},{:?}", g.alpha, g.beta);
                }
                None => s.push_str(",\n"),
            }
        }
        s
    }
}

fn header(config_hash: Option<&str>) -> String {
    config_hash.map(|h| format!("# config_hash={h}\n")).unwrap_or_default()
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn unit(v: Point) -> Option<Point> {
    let n = v[0].hypot(v[1]);
    (n > 0.0 && n.is_finite()).then(|| [v[0] / n, v[1] / n])
}

struct Crossing {
    position: Point,
    normal: Point,
}

/// Crossing of level 1 on the edge `(a, b)`, which must straddle it.
fn edge_crossing(grid: &Grid, u: &[f64], grad: &[[f64; 2]], a: usize, b: usize) -> Crossing {
    let t = (1.0 - u[a]) / (u[b] - u[a]);
    let (pa, pb) = (grid.coords(a), grid.coords(b));
    let position = lerp(pa, pb, t);
    let uphill = if u[b] > u[a] { [pb[0] - pa[0], pb[1] - pa[1]] } else { [pa[0] - pb[0], pa[1] - pb[1]] };
    let g = lerp(grad[a], grad[b], t);
    let normal = match unit(g) {
        Some(n) if n[0] * uphill[0] + n[1] * uphill[1] > 0.0 => n,
        _ => unit(uphill).unwrap(),
    };
    Crossing { position, normal }
}

/// Marching squares on level 1 with linear edge interpolation. Saddle cells
/// join the two superlevel corners when the cell average exceeds 1 and
/// separate them otherwise.
pub fn extract_free_boundary(grid: &Grid, u: &[f64]) -> FreeBoundary {
    let mut fb = match *grid.kind() {
        GridKind::Radial { n, .. } => radial_crossings(grid, u, n),
        GridKind::Rect { nx, ny, .. } => marching_squares(grid, u, nx, ny),
    };
    let h = grid.spacing().0.max(grid.spacing().1);
    for p in &mut fb.points {
        p.gradients = one_sided_gradients(grid, u, p.position, p.normal, h);
    }
    fb
}

fn radial_crossings(grid: &Grid, u: &[f64], n: usize) -> FreeBoundary {
    let mut points = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (u[i] > 1.0, u[i + 1] > 1.0);
        if a != b {
            let t = (1.0 - u[i]) / (u[i + 1] - u[i]);
            let r = grid.coords(i)[0] + t * grid.spacing().0;
            points.push(BoundaryPoint {
                position: [r, 0.0],
                normal: [if a { -1.0 } else { 1.0 }, 0.0],
                gradients: None,
            });
        }
    }
    FreeBoundary {
        segments: Vec::new(),
        points,
    }
}

fn marching_squares(grid: &Grid, u: &[f64], nx: usize, ny: usize) -> FreeBoundary {
    let grad = grid.gradient_field(u);
    let mut crossings: Vec<Crossing> = Vec::new();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut segments = Vec::new();
    let mut crossing = |a: usize, b: usize, crossings: &mut Vec<Crossing>| -> usize {
        *index.entry((a.min(b), a.max(b))).or_insert_with(|| {
            crossings.push(edge_crossing(grid, u, &grad, a, b));
            crossings.len() - 1
        })
    };
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // corners counter-clockwise from the lower left
            let c = [j * nx + i, j * nx + i + 1, (j + 1) * nx + i + 1, (j + 1) * nx + i];
            let inside = c.map(|k| u[k] > 1.0);
            let count = inside.iter().filter(|&&b| b).count();
            if count == 0 || count == 4 {
                continue;
            }
            // edge e joins corners e and e+1
            let mut cut = [None; 4];
            for e in 0..4 {
                let (a, b) = (c[e], c[(e + 1) % 4]);
                if inside[e] != inside[(e + 1) % 4] {
                    cut[e] = Some(crossing(a, b, &mut crossings));
                }
            }
            let pairs: Vec<(usize, usize)> = if count == 2 && inside[0] == inside[2] {
                let avg = 0.25 * c.iter().map(|&k| u[k]).sum::<f64>();
                // isolate the corners that are not connected through the cell
                let connected_inside = avg > 1.0;
                let isolate_even = inside[0] != connected_inside;
                if isolate_even {
                    // corners 0 and 2: edges (3, 0) and (1, 2)
                    vec![(3, 0), (1, 2)]
                } else {
                    vec![(0, 1), (2, 3)]
                }
            } else {
                let es: Vec<usize> = (0..4).filter(|&e| cut[e].is_some()).collect();
                vec![(es[0], es[1])]
            };
            for (e1, e2) in pairs {
                let (p, q) = (cut[e1].unwrap(), cut[e2].unwrap());
                segments.push(oriented(&crossings[p], &crossings[q]));
            }
        }
    }
    FreeBoundary {
        segments,
        points: crossings
            .into_iter()
            .map(|c| BoundaryPoint {
                position: c.position,
                normal: c.normal,
                gradients: None,
            })
            .collect(),
    }
}

/// Segment with the superlevel side on its left.
fn oriented(p: &Crossing, q: &Crossing) -> Segment {
    let d = [q.position[0] - p.position[0], q.position[1] - p.position[1]];
    let left = [-d[1], d[0]];
    let n = [p.normal[0] + q.normal[0], p.normal[1] + q.normal[1]];
    if left[0] * n[0] + left[1] * n[1] >= 0.0 {
        Segment { a: p.position, b: q.position }
    } else {
        Segment { a: q.position, b: p.position }
    }
}

/// Slopes of `u` along `±normal` at the boundary point: the linear
/// coefficient of the quadratic through the interpolated samples at
/// [`SAMPLE_OFFSETS`]` · h` on each side. The free constant term absorbs an
/// `O(h)` misplacement of the extracted point, and the quadratic term
/// removes the curvature bias a straight-line fit picks up at `3h`. Returns
/// `None` when a sample leaves the domain.
pub fn one_sided_gradients(grid: &Grid, u: &[f64], point: Point, normal: Point, h: f64) -> Option<OneSided> {
    let side = |sign: f64| -> Option<f64> {
        let mut values = [0.0; SAMPLE_OFFSETS.len()];
        for (v, &k) in values.iter_mut().zip(&SAMPLE_OFFSETS) {
            let p = [point[0] + sign * k * h * normal[0], point[1] + sign * k * h * normal[1]];
            if !grid.contains(p) {
                return None;
            }
            *v = grid.interpolate(u, p)?;
        }
        Some(derivative_at_zero(&SAMPLE_OFFSETS, &values) / h)
    };
    let alpha = side(1.0)?;
    let beta = -side(-1.0)?;
    Some(OneSided {
        alpha: alpha.max(0.0),
        beta: beta.max(0.0),
    })
}

/// Derivative at 0 of the Lagrange interpolant through `(x_i, y_i)`.
fn derivative_at_zero(x: &[f64], y: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.len() {
        // l_i'(0) = l_i(0) Σ_{j≠i} 1 / (0 - x_j)
        let mut l0 = 1.0;
        let mut sum = 0.0;
        for j in 0..x.len() {
            if j != i {
                l0 *= -x[j] / (x[i] - x[j]);
                sum += -1.0 / x[j];
            }
        }
        total += y[i] * l0 * sum;
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMethod {
    /// Exact Euclidean distance to the nearest sublevel node.
    #[default]
    Exact,
    /// Two raster passes propagating nearest-node offsets over the
    /// 8-neighbourhood; may overestimate by a fraction of `h` near concave
    /// parts of the sublevel set.
    TwoPass,
}

/// Per-node distance to the node set `{u ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub values: Field,
    pub method: DistanceMethod,
}

pub fn distance_to_sublevel(grid: &Grid, u: &[f64], method: DistanceMethod) -> DistanceField {
    let values = match (method, grid.kind()) {
        (DistanceMethod::TwoPass, GridKind::Rect { nx, ny, .. }) => two_pass(grid, u, *nx, *ny),
        _ => exact(grid, u),
    };
    DistanceField { values, method }
}

/// The nearest sublevel node of any node always has a superlevel
/// 4-neighbour (stepping toward the query along the dominant axis would
/// otherwise get closer), so only those frontier nodes are searched.
fn exact(grid: &Grid, u: &[f64]) -> Field {
    let n = grid.len();
    let (nx, ny) = grid.shape();
    let neighbours = |k: usize| {
        let (i, j) = (k % nx, k / nx);
        let mut out = Vec::with_capacity(4);
        if i > 0 {
            out.push(k - 1);
        }
        if i + 1 < nx {
            out.push(k + 1);
        }
        if j > 0 {
            out.push(k - nx);
        }
        if j + 1 < ny {
            out.push(k + nx);
        }
        out
    };
    let frontier: Vec<Point> = (0..n)
        .filter(|&k| u[k] <= 1.0 && neighbours(k).iter().any(|&m| u[m] > 1.0))
        .map(|k| grid.coords(k))
        .collect();
    let mut out = vec![0.0; n];
    for k in 0..n {
        if u[k] <= 1.0 {
            continue;
        }
        let p = grid.coords(k);
        let d2 = frontier
            .iter()
            .map(|q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))
            .fold(f64::INFINITY, f64::min);
        out[k] = d2.sqrt();
    }
    Field::from_vec(out)
}

fn two_pass(grid: &Grid, u: &[f64], nx: usize, ny: usize) -> Field {
    let (hx, hy) = grid.spacing();
    let far = (i64::MAX / 4, i64::MAX / 4);
    let mut off: Vec<(i64, i64)> = u.iter().map(|&v| if v <= 1.0 { (0, 0) } else { far }).collect();
    let len = |o: (i64, i64)| {
        if o == far {
            f64::INFINITY
        } else {
            ((o.0 as f64 * hx).powi(2) + (o.1 as f64 * hy).powi(2)).sqrt()
        }
    };
    let relax = |i: usize, j: usize, di: i64, dj: i64, off: &mut Vec<(i64, i64)>| {
        let (ni, nj) = (i as i64 + di, j as i64 + dj);
        if ni < 0 || nj < 0 || ni >= nx as i64 || nj >= ny as i64 {
            return;
        }
        let o = off[nj as usize * nx + ni as usize];
        if o == far {
            return;
        }
        let cand = (o.0 - di, o.1 - dj);
        let k = j * nx + i;
        if len(cand) < len(off[k]) {
            off[k] = cand;
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            for (di, dj) in [(-1, 0), (-1, -1), (0, -1), (1, -1)] {
                relax(i, j, di, dj, &mut off);
            }
        }
        for i in (0..nx).rev() {
            relax(i, j, 1, 0, &mut off);
        }
    }
    for j in (0..ny).rev() {
        for i in (0..nx).rev() {
            for (di, dj) in [(1, 0), (1, 1), (0, 1), (-1, 1)] {
                relax(i, j, di, dj, &mut off);
            }
        }
        for i in 0..nx {
            relax(i, j, -1, 0, &mut off);
        }
    }
    Field::from_vec(off.into_iter().map(len).collect())
}
