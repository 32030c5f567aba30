//! Matrix-free Krylov solvers on node vectors. Dirichlet entries are kept at
//! zero by the operators passed in.

use crate::error::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// `‖b - A x‖ / ‖b‖` in the Euclidean norm, recomputed at exit.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn true_residual<A: Fn(&[f64], &mut [f64])>(apply: &A, b: &[f64], x: &[f64]) -> f64 {
    let mut ax = vec![0.0; b.len()];
    apply(x, &mut ax);
    let r: f64 = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum();
    let nb = dot(b, b).sqrt();
    if nb == 0.0 {
        r.sqrt()
    } else {
        r.sqrt() / nb
    }
}

/// Preconditioned conjugate gradients for SPD `apply`; `precond` applies an
/// SPD approximation of the inverse. `x` holds the initial guess.
pub fn conjugate_gradient<A, M>(
    apply: A,
    precond: M,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome, SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let nb = dot(b, b).sqrt();
    if nb == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rnorm = dot(&r, &r).sqrt();
        if rnorm <= tol * nb {
            return Ok(KrylovOutcome {
                iterations: it,
                relative_residual: true_residual(&apply, b, x),
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::LinearNonConvergence {
                iterations: it,
                residual: rnorm / nb,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = true_residual(&apply, b, x);
    if res <= tol {
        return Ok(KrylovOutcome {
            iterations: max_iter,
            relative_residual: res,
        });
    }
    Err(SolverError::LinearNonConvergence {
        iterations: max_iter,
        residual: res,
    })
}

/// Preconditioned MINRES for symmetric, possibly indefinite `apply`;
/// `precond` must be SPD. Stops when the preconditioned residual estimate
/// drops below `tol` relative to its initial value, then reports the true
/// Euclidean residual.
pub fn minres<A, M>(
    apply: A,
    precond: M,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovOutcome, SolverError>
where
    A: Fn(&[f64], &mut [f64]),
    M: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut r1 = vec![0.0; n];
    apply(x, &mut r1);
    for (ri, bi) in r1.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(SolverError::LinearNonConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let beta1 = beta1.sqrt();
    if beta1 == 0.0 {
        return Ok(KrylovOutcome {
            iterations: 0,
            relative_residual: true_residual(&apply, b, x),
        });
    }
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut av = vec![0.0; n];

    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut av);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                av[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &av);
        let f = alfa / beta;
        for i in 0..n {
            av[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&av);
        precond(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(SolverError::LinearNonConvergence {
                iterations: itn,
                residual: phibar / beta1,
            });
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        if phibar <= tol * beta1 || beta == 0.0 {
            return Ok(KrylovOutcome {
                iterations: itn,
                relative_residual: true_residual(&apply, b, x),
            });
        }
    }
    Err(SolverError::LinearNonConvergence {
        iterations: max_iter,
        residual: true_residual(&apply, b, x),
    })
}
