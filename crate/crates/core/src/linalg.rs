//! Matrix-free Krylov solvers with Jacobi preconditioning.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearSolveError {
    #[error("linear solve did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("linear solver breakdown after {iterations} iterations")]
    Breakdown { iterations: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Dot product with a fixed pairwise reduction order.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::mesh::weighted_sum(a, b)
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. `x` holds the initial guess and receives the solution.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<SolveStats, LinearSolveError> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, d)| ri / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = norm(&r) / b_norm;
    if res <= rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: res,
        });
    }
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(LinearSolveError::Breakdown { iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / b_norm;
        if res <= rel_tol {
            // confirm against the true residual
            apply(x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            res = norm(&r) / b_norm;
            if res <= rel_tol {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: res,
                });
            }
            // recurrence drifted: restart from the true residual
            for i in 0..n {
                z[i] = r[i] / diag[i];
                p[i] = z[i];
            }
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinearSolveError::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}

/// Right-preconditioned BiCGSTAB for general nonsingular operators.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<SolveStats, LinearSolveError> {
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm(&r) / b_norm;
    if res <= rel_tol {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: res,
        });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(LinearSolveError::Breakdown { iterations: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            p_hat[i] = p[i] / diag[i];
        }
        apply(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            return Err(LinearSolveError::Breakdown { iterations: it });
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / b_norm <= rel_tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
        } else {
            for i in 0..n {
                s_hat[i] = s[i] / diag[i];
            }
            apply(&s_hat, &mut t);
            let tt = dot(&t, &t);
            if tt == 0.0 {
                return Err(LinearSolveError::Breakdown { iterations: it });
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
        }
        // true residual keeps the stopping test honest
        apply(x, &mut t);
        for i in 0..n {
            r[i] = b[i] - t[i];
        }
        res = norm(&r) / b_norm;
        if res <= rel_tol {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: res,
            });
        }
        if omega == 0.0 {
            return Err(LinearSolveError::Breakdown { iterations: it });
        }
    }
    Err(LinearSolveError::NotConverged {
        iterations: max_iter,
        residual: res,
    })
}
