use serde::{Deserialize, Serialize};

use super::field::{CompensatedSum, Field, VectorField};
use crate::error::ConfigError;
use crate::nonlinearity::Point;

/// Minimum number of nodes per direction.
pub const MIN_NODES: usize = 17;

/// Surface area of the unit sphere in `R^dim`.
pub fn sphere_area(dim: u32) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        d => {
            // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2); recurse on d - 2
            2.0 * std::f64::consts::PI / (d as f64 - 2.0) * sphere_area(d - 2)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    /// Tensor grid on a box. With `disk_radius`, nodes outside the open disk
    /// centred in the box are Dirichlet nodes.
    Rect {
        nx: usize,
        ny: usize,
        x_range: [f64; 2],
        y_range: [f64; 2],
        disk_radius: Option<f64>,
    },
    /// Radially symmetric ball of `R^dim`, nodes `r_i = i R / (n - 1)`.
    Radial { dim: u32, radius: f64, n: usize },
}

/// Node-indexed discretization of the domain with a Dirichlet mask.
///
/// Rectangular nodes are stored row-major, `index = j * nx + i`. The discrete
/// Dirichlet energy is an edge sum and the quadrature weights are dual-cell
/// volumes, so `-Δ_h u = -(K u) / w` where `K` is the stiffness operator.
#[derive(Debug, Clone)]
pub struct Grid {
    kind: GridKind,
    hx: f64,
    hy: f64,
    interior: Vec<bool>,
    weights: Vec<f64>,
    /// radial only: `|S^{N-1}| r_{i+1/2}^{N-1} / h` for the edge `(i, i+1)`
    edge_coef: Vec<f64>,
}

impl Grid {
    /// Box grid with `nx * ny` nodes including the boundary rows.
    pub fn rect(nx: usize, ny: usize, x_range: [f64; 2], y_range: [f64; 2]) -> Result<Self, ConfigError> {
        Self::build_rect(nx, ny, x_range, y_range, None)
    }

    /// `n * n` grid on the square `[lo, hi]^2`.
    pub fn square(n: usize, lo: f64, hi: f64) -> Result<Self, ConfigError> {
        Self::rect(n, n, [lo, hi], [lo, hi])
    }

    /// Masked disk of the given radius centred at the origin, embedded in an
    /// `n * n` grid on `[-radius, radius]^2`.
    pub fn disk(n: usize, radius: f64) -> Result<Self, ConfigError> {
        if !(radius > 0.0) {
            return Err(ConfigError::Grid(format!("disk radius must be positive, got {radius}")));
        }
        Self::build_rect(n, n, [-radius, radius], [-radius, radius], Some(radius))
    }

    fn build_rect(
        nx: usize,
        ny: usize,
        x_range: [f64; 2],
        y_range: [f64; 2],
        disk_radius: Option<f64>,
    ) -> Result<Self, ConfigError> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(ConfigError::Grid(format!(
                "need at least {MIN_NODES} nodes per direction, got {nx} x {ny}"
            )));
        }
        if !(x_range[1] > x_range[0] && y_range[1] > y_range[0]) {
            return Err(ConfigError::Grid("empty box".into()));
        }
        let hx = (x_range[1] - x_range[0]) / (nx - 1) as f64;
        let hy = (y_range[1] - y_range[0]) / (ny - 1) as f64;
        let mut interior = vec![false; nx * ny];
        let mut weights = vec![0.0; nx * ny];
        let (cx, cy) = (
            0.5 * (x_range[0] + x_range[1]),
            0.5 * (y_range[0] + y_range[1]),
        );
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let edge_i = i == 0 || i == nx - 1;
                let edge_j = j == 0 || j == ny - 1;
                match disk_radius {
                    None => {
                        interior[k] = !(edge_i || edge_j);
                        let fx = if edge_i { 0.5 } else { 1.0 };
                        let fy = if edge_j { 0.5 } else { 1.0 };
                        weights[k] = fx * fy * hx * hy;
                    }
                    Some(r) => {
                        let x = x_range[0] + i as f64 * hx - cx;
                        let y = y_range[0] + j as f64 * hy - cy;
                        let inside = x * x + y * y < r * r && !(edge_i || edge_j);
                        interior[k] = inside;
                        weights[k] = if inside { hx * hy } else { 0.0 };
                    }
                }
            }
        }
        Ok(Grid {
            kind: GridKind::Rect {
                nx,
                ny,
                x_range,
                y_range,
                disk_radius,
            },
            hx,
            hy,
            interior,
            weights,
            edge_coef: Vec::new(),
        })
    }

    /// Radial ball grid, Dirichlet at `r = R`, symmetric at the origin.
    pub fn radial(dim: u32, radius: f64, n: usize) -> Result<Self, ConfigError> {
        if !(2..=3).contains(&dim) {
            return Err(ConfigError::Grid(format!("radial grids support N in {{2, 3}}, got {dim}")));
        }
        if n < MIN_NODES {
            return Err(ConfigError::Grid(format!("need at least {MIN_NODES} radial nodes, got {n}")));
        }
        if !(radius > 0.0) {
            return Err(ConfigError::Grid(format!("radius must be positive, got {radius}")));
        }
        let h = radius / (n - 1) as f64;
        let area = sphere_area(dim);
        let d = dim as f64;
        let shell = |a: f64, b: f64| area / d * (b.powi(dim as i32) - a.powi(dim as i32));
        let weights = (0..n)
            .map(|i| {
                let lo = if i == 0 { 0.0 } else { (i as f64 - 0.5) * h };
                let hi = if i == n - 1 { radius } else { (i as f64 + 0.5) * h };
                shell(lo, hi)
            })
            .collect();
        let edge_coef = (0..n - 1)
            .map(|i| area * ((i as f64 + 0.5) * h).powf(d - 1.0) / h)
            .collect();
        let mut interior = vec![true; n];
        interior[n - 1] = false;
        Ok(Grid {
            kind: GridKind::Radial { dim, radius, n },
            hx: h,
            hy: h,
            interior,
            weights,
            edge_coef,
        })
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn is_radial(&self) -> bool {
        matches!(self.kind, GridKind::Radial { .. })
    }

    /// Node counts `(nx, ny)`; radial grids report `(n, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        match self.kind {
            GridKind::Rect { nx, ny, .. } => (nx, ny),
            GridKind::Radial { n, .. } => (n, 1),
        }
    }

    /// Spatial dimension of the represented domain.
    pub fn dim(&self) -> u32 {
        match self.kind {
            GridKind::Rect { .. } => 2,
            GridKind::Radial { dim, .. } => dim,
        }
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    /// The smaller spacing.
    pub fn h(&self) -> f64 {
        self.hx.min(self.hy)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interior_mask(&self) -> &[bool] {
        &self.interior
    }

    pub fn is_interior(&self, k: usize) -> bool {
        self.interior[k]
    }

    /// Domain measure `|Ω|`.
    pub fn volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Physical coordinates of node `k`; radial nodes map to `[r, 0]`.
    pub fn coords(&self, k: usize) -> Point {
        match self.kind {
            GridKind::Rect {
                nx,
                x_range,
                y_range,
                ..
            } => {
                let (i, j) = (k % nx, k / nx);
                [
                    x_range[0] + i as f64 * self.hx,
                    y_range[0] + j as f64 * self.hy,
                ]
            }
            GridKind::Radial { .. } => [k as f64 * self.hx, 0.0],
        }
    }

    pub fn zeros(&self) -> Field {
        Field::zeros(self.len())
    }

    /// Samples `f` at every node.
    pub fn sample<F: Fn(Point) -> f64>(&self, f: F) -> Field {
        Field::from_vec((0..self.len()).map(|k| f(self.coords(k))).collect())
    }

    /// Samples `f` at interior nodes and sets Dirichlet nodes to zero.
    pub fn sample_admissible<F: Fn(Point) -> f64>(&self, f: F) -> Field {
        Field::from_vec(
            (0..self.len())
                .map(|k| if self.interior[k] { f(self.coords(k)) } else { 0.0 })
                .collect(),
        )
    }

    pub fn apply_mask(&self, u: &mut [f64]) {
        for (v, &inside) in u.iter_mut().zip(&self.interior) {
            if !inside {
                *v = 0.0;
            }
        }
    }

    pub fn is_admissible(&self, u: &[f64]) -> bool {
        u.len() == self.len()
            && u
                .iter()
                .zip(&self.interior)
                .all(|(v, &inside)| v.is_finite() && (inside || *v == 0.0))
    }

    /// Weighted sum `Σ w_k f_k`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).collect::<CompensatedSum>().value()
    }

    /// `⟨u, v⟩ = Σ w_k u_k v_k`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Visits every edge with at least one interior endpoint as
    /// `(a, b, coefficient)`; `½ Σ c (u_a - u_b)^2` is the Dirichlet energy.
    pub fn for_each_edge<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        match self.kind {
            GridKind::Rect { nx, ny, .. } => {
                let cx = self.hy / self.hx;
                let cy = self.hx / self.hy;
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        if i + 1 < nx && (self.interior[k] || self.interior[k + 1]) {
                            f(k, k + 1, cx);
                        }
                        if j + 1 < ny && (self.interior[k] || self.interior[k + nx]) {
                            f(k, k + nx, cy);
                        }
                    }
                }
            }
            GridKind::Radial { n, .. } => {
                for i in 0..n - 1 {
                    f(i, i + 1, self.edge_coef[i]);
                }
            }
        }
    }

    /// Bilinear form `D(u, v) = Σ_edges c (u_a - u_b)(v_a - v_b)`, the
    /// discrete `∫ ∇u · ∇v`.
    pub fn dirichlet_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut acc = CompensatedSum::default();
        self.for_each_edge(|a, b, c| acc.add(c * (u[a] - u[b]) * (v[a] - v[b])));
        acc.value()
    }

    /// `out = K u` on interior nodes, zero on Dirichlet nodes, where
    /// `K = ∂/∂u (½ D(u, u))`.
    pub fn stiffness_apply(&self, u: &[f64], out: &mut [f64]) {
        match self.kind {
            GridKind::Rect { nx, ny, .. } => {
                let cx = self.hy / self.hx;
                let cy = self.hx / self.hy;
                for j in 0..ny {
                    for i in 0..nx {
                        let k = j * nx + i;
                        if !self.interior[k] {
                            out[k] = 0.0;
                            continue;
                        }
                        // interior nodes never sit on the box edge
                        let c = u[k];
                        out[k] = cx * (2.0 * c - u[k - 1] - u[k + 1])
                            + cy * (2.0 * c - u[k - nx] - u[k + nx]);
                    }
                }
            }
            GridKind::Radial { n, .. } => {
                let a = &self.edge_coef;
                for i in 0..n {
                    if !self.interior[i] {
                        out[i] = 0.0;
                        continue;
                    }
                    let mut acc = a[i] * (u[i] - u[i + 1]);
                    if i > 0 {
                        acc += a[i - 1] * (u[i] - u[i - 1]);
                    }
                    out[i] = acc;
                }
            }
        }
    }

    /// Diagonal of the stiffness operator (1 on Dirichlet nodes).
    pub fn stiffness_diagonal(&self) -> Vec<f64> {
        match self.kind {
            GridKind::Rect { .. } => {
                let d = 2.0 * (self.hy / self.hx + self.hx / self.hy);
                self.interior.iter().map(|&i| if i { d } else { 1.0 }).collect()
            }
            GridKind::Radial { n, .. } => (0..n)
                .map(|i| {
                    if !self.interior[i] {
                        1.0
                    } else if i == 0 {
                        self.edge_coef[0]
                    } else {
                        self.edge_coef[i - 1] + self.edge_coef[i]
                    }
                })
                .collect(),
        }
    }

    /// Radial edge coefficients `|S^{N-1}| r_{i+1/2}^{N-1} / h`.
    pub(crate) fn radial_edge_coef(&self) -> &[f64] {
        &self.edge_coef
    }

    /// `Δ_h u` at interior nodes, zero on Dirichlet nodes: the 5-point
    /// stencil on boxes, the finite-volume form of `u'' + (N-1) u' / r` on
    /// radial grids.
    pub fn laplacian_apply(&self, u: &[f64]) -> Field {
        let mut out = vec![0.0; self.len()];
        self.stiffness_apply(u, &mut out);
        for (k, v) in out.iter_mut().enumerate() {
            if self.interior[k] {
                *v = -*v / self.weights[k];
            }
        }
        Field::from_vec(out)
    }

    /// Gradient by centred differences inside, second-order one-sided
    /// differences on the box edges. Radial grids return `[u_r, 0]` with
    /// `u_r(0) = 0`.
    pub fn gradient_field(&self, u: &[f64]) -> VectorField {
        fn diff(u: &[f64], k: usize, stride: usize, pos: usize, len: usize, h: f64) -> f64 {
            if pos == 0 {
                (-3.0 * u[k] + 4.0 * u[k + stride] - u[k + 2 * stride]) / (2.0 * h)
            } else if pos == len - 1 {
                (3.0 * u[k] - 4.0 * u[k - stride] + u[k - 2 * stride]) / (2.0 * h)
            } else {
                (u[k + stride] - u[k - stride]) / (2.0 * h)
            }
        }
        match self.kind {
            GridKind::Rect { nx, ny, .. } => (0..self.len())
                .map(|k| {
                    let (i, j) = (k % nx, k / nx);
                    [
                        diff(u, k, 1, i, nx, self.hx),
                        diff(u, k, nx, j, ny, self.hy),
                    ]
                })
                .collect(),
            GridKind::Radial { n, .. } => (0..n)
                .map(|i| {
                    if i == 0 {
                        [0.0, 0.0]
                    } else {
                        [diff(u, i, 1, i, n, self.hx), 0.0]
                    }
                })
                .collect(),
        }
    }

    /// Bilinear (box) or linear (radial, argument `|p|`) interpolation.
    /// Returns `None` outside the grid box.
    pub fn interpolate(&self, u: &[f64], p: Point) -> Option<f64> {
        match self.kind {
            GridKind::Rect {
                nx,
                ny,
                x_range,
                y_range,
                ..
            } => {
                let fx = (p[0] - x_range[0]) / self.hx;
                let fy = (p[1] - y_range[0]) / self.hy;
                if !(fx >= 0.0 && fy >= 0.0 && fx <= (nx - 1) as f64 && fy <= (ny - 1) as f64) {
                    return None;
                }
                let i = (fx.floor() as usize).min(nx - 2);
                let j = (fy.floor() as usize).min(ny - 2);
                let (tx, ty) = (fx - i as f64, fy - j as f64);
                let k = j * nx + i;
                Some(
                    (1.0 - tx) * (1.0 - ty) * u[k]
                        + tx * (1.0 - ty) * u[k + 1]
                        + (1.0 - tx) * ty * u[k + nx]
                        + tx * ty * u[k + nx + 1],
                )
            }
            GridKind::Radial { n, .. } => {
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                let f = r / self.hx;
                if f > (n - 1) as f64 {
                    return None;
                }
                let i = (f.floor() as usize).min(n - 2);
                let t = f - i as f64;
                Some((1.0 - t) * u[i] + t * u[i + 1])
            }
        }
    }

    /// Whether `p` lies in the closed computational region (box, disk or
    /// ball).
    pub fn contains(&self, p: Point) -> bool {
        match self.kind {
            GridKind::Rect {
                x_range,
                y_range,
                disk_radius,
                ..
            } => {
                let in_box = p[0] >= x_range[0]
                    && p[0] <= x_range[1]
                    && p[1] >= y_range[0]
                    && p[1] <= y_range[1];
                match disk_radius {
                    None => in_box,
                    Some(r) => {
                        let cx = 0.5 * (x_range[0] + x_range[1]);
                        let cy = 0.5 * (y_range[0] + y_range[1]);
                        in_box && (p[0] - cx).powi(2) + (p[1] - cy).powi(2) <= r * r
                    }
                }
            }
            GridKind::Radial { radius, .. } => p[0] * p[0] + p[1] * p[1] <= radius * radius,
        }
    }

    /// Distance from `p` to the boundary of the computational region
    /// (negative outside).
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        match self.kind {
            GridKind::Rect {
                x_range,
                y_range,
                disk_radius,
                ..
            } => match disk_radius {
                None => (p[0] - x_range[0])
                    .min(x_range[1] - p[0])
                    .min(p[1] - y_range[0])
                    .min(y_range[1] - p[1]),
                Some(r) => {
                    let cx = 0.5 * (x_range[0] + x_range[1]);
                    let cy = 0.5 * (y_range[0] + y_range[1]);
                    r - ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt()
                }
            },
            GridKind::Radial { radius, .. } => radius - (p[0] * p[0] + p[1] * p[1]).sqrt(),
        }
    }
}
