//! Direct solvers for the stiffness operator `K`: sine transforms on plain
//! boxes, the Thomas algorithm on radial grids, and Jacobi-CG on masked
//! disks. Used for Sobolev gradients and as the Krylov preconditioner.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::grid::{Grid, GridKind};
use super::linsolve::conjugate_gradient;

/// Type-I discrete sine transform of length `m`, computed through an FFT of
/// length `2(m + 1)`: `X_k = Σ_j x_j sin(π j k / (m + 1))`, `j, k = 1..m`.
struct Dst {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst {
    fn new(m: usize, planner: &mut FftPlanner<f64>) -> Self {
        Dst {
            m,
            fft: planner.plan_fft_forward(2 * (m + 1)),
        }
    }

    fn apply(&self, data: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>]) {
        let m = self.m;
        let len = 2 * (m + 1);
        buf[0] = Complex::new(0.0, 0.0);
        buf[m + 1] = Complex::new(0.0, 0.0);
        for j in 0..m {
            buf[j + 1] = Complex::new(data[j], 0.0);
            buf[len - 1 - j] = Complex::new(-data[j], 0.0);
        }
        self.fft.process_with_scratch(buf, scratch);
        for k in 0..m {
            data[k] = -0.5 * buf[k + 1].im;
        }
    }
}

enum Backend {
    Sine {
        mx: usize,
        my: usize,
        dst_x: Dst,
        dst_y: Dst,
        eig: Vec<f64>,
    },
    Tridiagonal,
    Iterative,
}

/// Exact (up to round-off) solver for `K d = b` with zero Dirichlet data.
pub struct PoissonSolver<'g> {
    grid: &'g Grid,
    backend: Backend,
}

impl<'g> PoissonSolver<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        let backend = match *grid.kind() {
            GridKind::Rect {
                nx,
                ny,
                disk_radius: None,
                ..
            } => {
                let (hx, hy) = grid.spacing();
                let (mx, my) = (nx - 2, ny - 2);
                let mut planner = FftPlanner::new();
                let lam = |k: usize, m: usize| {
                    let s = (std::f64::consts::PI * k as f64 / (2.0 * (m + 1) as f64)).sin();
                    4.0 * s * s
                };
                let mut eig = vec![0.0; mx * my];
                for ky in 0..my {
                    for kx in 0..mx {
                        eig[ky * mx + kx] = hy / hx * lam(kx + 1, mx) + hx / hy * lam(ky + 1, my);
                    }
                }
                Backend::Sine {
                    mx,
                    my,
                    dst_x: Dst::new(mx, &mut planner),
                    dst_y: Dst::new(my, &mut planner),
                    eig,
                }
            }
            GridKind::Rect { .. } => Backend::Iterative,
            GridKind::Radial { .. } => Backend::Tridiagonal,
        };
        PoissonSolver { grid, backend }
    }

    /// Solves `K d = b` on interior nodes; Dirichlet entries of `b` are
    /// ignored and those of the result are zero.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        let n = grid.len();
        let mut out = vec![0.0; n];
        match &self.backend {
            Backend::Sine {
                mx,
                my,
                dst_x,
                dst_y,
                eig,
            } => {
                let (mx, my) = (*mx, *my);
                let nx = mx + 2;
                let mut a = vec![0.0; mx * my];
                for j in 0..my {
                    for i in 0..mx {
                        a[j * mx + i] = b[(j + 1) * nx + i + 1];
                    }
                }
                let lmax = 2 * (mx.max(my) + 1);
                let mut buf = vec![Complex::new(0.0, 0.0); lmax];
                let scratch_len = dst_x
                    .fft
                    .get_inplace_scratch_len()
                    .max(dst_y.fft.get_inplace_scratch_len());
                let mut scratch = vec![Complex::new(0.0, 0.0); scratch_len];
                let mut col = vec![0.0; my];
                let transform = |a: &mut [f64], buf: &mut [Complex<f64>], scratch: &mut [Complex<f64>], col: &mut [f64]| {
                    for row in a.chunks_mut(mx) {
                        dst_x.apply(row, &mut buf[..2 * (mx + 1)], &mut scratch[..dst_x.fft.get_inplace_scratch_len()]);
                    }
                    for i in 0..mx {
                        for j in 0..my {
                            col[j] = a[j * mx + i];
                        }
                        dst_y.apply(col, &mut buf[..2 * (my + 1)], &mut scratch[..dst_y.fft.get_inplace_scratch_len()]);
                        for j in 0..my {
                            a[j * mx + i] = col[j];
                        }
                    }
                };
                transform(&mut a, &mut buf, &mut scratch, &mut col);
                let scale = 4.0 / ((mx + 1) * (my + 1)) as f64;
                for (v, e) in a.iter_mut().zip(eig) {
                    *v *= scale / e;
                }
                transform(&mut a, &mut buf, &mut scratch, &mut col);
                for j in 0..my {
                    for i in 0..mx {
                        out[(j + 1) * nx + i + 1] = a[j * mx + i];
                    }
                }
            }
            Backend::Tridiagonal => {
                // nodes 0..n-2 unknown, node n-1 Dirichlet
                let a = grid.radial_edge_coef();
                let m = n - 1;
                let mut c_prime = vec![0.0; m];
                let mut d_prime = vec![0.0; m];
                for i in 0..m {
                    let diag = a[i] + if i > 0 { a[i - 1] } else { 0.0 };
                    let lower = if i > 0 { -a[i - 1] } else { 0.0 };
                    let upper = if i + 1 < m { -a[i] } else { 0.0 };
                    let denom = diag - lower * if i > 0 { c_prime[i - 1] } else { 0.0 };
                    c_prime[i] = upper / denom;
                    d_prime[i] = (b[i] - lower * if i > 0 { d_prime[i - 1] } else { 0.0 }) / denom;
                }
                out[m - 1] = d_prime[m - 1];
                for i in (0..m - 1).rev() {
                    out[i] = d_prime[i] - c_prime[i] * out[i + 1];
                }
            }
            Backend::Iterative => {
                let diag = grid.stiffness_diagonal();
                let mut rhs = b.to_vec();
                grid.apply_mask(&mut rhs);
                // Only reachable for masked disks, where K is SPD on the mask.
                let _ = conjugate_gradient(
                    |x: &[f64], y: &mut [f64]| grid.stiffness_apply(x, y),
                    |r: &[f64], z: &mut [f64]| {
                        for i in 0..r.len() {
                            z[i] = r[i] / diag[i];
                        }
                    },
                    &rhs,
                    &mut out,
                    1e-13,
                    20 * n,
                );
                grid.apply_mask(&mut out);
            }
        }
        out
    }
}
