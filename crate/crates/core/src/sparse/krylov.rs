use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let rp = a.row_ptr().to_vec();
        let ci = a.col_idx().to_vec();
        let mut vals = a.values().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in rp[r]..rp[r + 1] {
                if ci[k] == r {
                    diag_pos[r] = k;
                }
            }
            if diag_pos[r] == usize::MAX {
                return Err(Error::Factorization(format!("missing diagonal in row {r}")));
            }
        }
        let mut marker = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = k;
            }
            for k in rp[i]..rp[i + 1] {
                let c = ci[k];
                if c >= i {
                    break;
                }
                let piv = vals[diag_pos[c]];
                if piv == 0.0 {
                    return Err(Error::Factorization(format!("zero pivot in row {c}")));
                }
                vals[k] /= piv;
                let lik = vals[k];
                for kk in diag_pos[c] + 1..rp[c + 1] {
                    let m = marker[ci[kk]];
                    if m != usize::MAX {
                        vals[m] -= lik * vals[kk];
                    }
                }
            }
            for k in rp[i]..rp[i + 1] {
                marker[ci[k]] = usize::MAX;
            }
        }
        let lu = CsrMatrix::from_raw(n, n, rp, ci, vals);
        Ok(Self { lu, diag_pos })
    }

    /// Solves (LU) z = r.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        let n = r.len();
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc / v[self.diag_pos[i]];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct KrylovReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Right-preconditioned BiCGSTAB. Convergence is declared when
/// ‖b − Ax‖∞ ≤ rtol ‖b‖∞ (checked on the true residual).
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], pre: &Ilu0, rtol: f64, max_iter: usize) -> Result<KrylovReport> {
    let n = b.len();
    let bnorm = norm_inf(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = norm_inf(&r) / bnorm;
    if rel <= rtol {
        return Ok(KrylovReport {
            iterations: 0,
            relative_residual: rel,
        });
    }
    let mut r0 = r.clone();
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut phat = vec![0.0; n];
    let mut shat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart from the current residual
            r0.copy_from_slice(&r);
            p.iter_mut().for_each(|e| *e = 0.0);
            v.iter_mut().for_each(|e| *e = 0.0);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut phat);
        a.matvec_into(&phat, &mut v);
        let denom = dot(&r0, &v);
        if denom == 0.0 {
            rho = 0.0;
            continue;
        }
        alpha = rho / denom;
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * phat[i];
        }
        if norm_inf(&r) <= rtol * bnorm {
            let res = true_residual(a, b, x) / bnorm;
            if res <= rtol {
                return Ok(KrylovReport {
                    iterations: it,
                    relative_residual: res,
                });
            }
        }
        pre.apply(&r, &mut shat);
        a.matvec_into(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &r) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += omega * shat[i];
            r[i] -= omega * t[i];
        }
        rel = norm_inf(&r) / bnorm;
        if rel <= rtol {
            let res = true_residual(a, b, x) / bnorm;
            if res <= rtol {
                return Ok(KrylovReport {
                    iterations: it,
                    relative_residual: res,
                });
            }
            // recurrence drifted: resync
            r = a.matvec(x);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            rel = res;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rel,
    })
}

fn true_residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> f64 {
    let ax = a.matvec(x);
    ax.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
}
