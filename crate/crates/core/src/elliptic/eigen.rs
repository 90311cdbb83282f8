use crate::elliptic::operator::AdvectionDiffusionOperator;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::sparse::{CsrMatrix, SparseLu};

/// Principal eigenpair of an operator.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub eigenvalue: f64,
    /// Normalized to max = 1.
    pub eigenfunction: ScalarField,
    /// ‖Lψ − μψ‖∞ / (|μ| ‖ψ‖∞).
    pub residual: f64,
    pub iterations: usize,
    /// Collatz–Wielandt bracket min/max (Lψ)ᵢ/ψᵢ at the final iterate
    /// (meaningful for Z-matrices with positive ψ).
    pub bracket: (f64, f64),
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    /// Relative change of the eigenvalue estimate.
    pub tol: f64,
    /// Relative residual required on exit.
    pub residual_tol: f64,
    pub max_iter: usize,
    /// Maximum number of shift updates (each costs a factorization).
    pub max_refactor: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            residual_tol: 1e-8,
            max_iter: 2000,
            max_refactor: 12,
        }
    }
}

fn collatz_wielandt(m: &CsrMatrix, x: &[f64]) -> Option<(f64, f64)> {
    if x.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx = m.matvec(x);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (a, b) in lx.iter().zip(x) {
        let r = a / b;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Some((lo, hi))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Diagonal similarity D⁻¹ M D that is as close to symmetric as the
/// sparsity pattern allows: ln d solves the least-squares problem
/// ln d_j − ln d_i ≈ ½ ln(M_ji / M_ij) over the coupled pairs. Exact for
/// gradient flows, where it removes the exponential spread of the
/// eigenvector that defeats inverse iteration at large Péclet numbers.
fn symmetrizing_scaling(m: &CsrMatrix) -> Result<Vec<f64>> {
    let n = m.nrows();
    let mut b = CsrMatrix::builder(n, n);
    let mut rhs = vec![0.0; n];
    let mut any = false;
    for i in 0..n {
        let mut deg: f64 = 0.0;
        for (j, mij) in m.row(i) {
            if j == i || mij >= 0.0 {
                continue;
            }
            let mji = m.get(j, i);
            if mji >= 0.0 {
                continue;
            }
            let w = 0.5 * (mji / mij).ln();
            any |= w != 0.0;
            deg += 1.0;
            b.push(j, -1.0);
            rhs[i] -= w;
        }
        // pins the free constant on every connected component
        b.push(i, deg + 1e-10 * deg.max(1.0));
        b.finish_row();
    }
    if !any {
        return Ok(vec![1.0; n]);
    }
    let s = SparseLu::new(&b.build())?.solve(&rhs)?;
    let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(s.iter().map(|v| (v - top).exp()).collect())
}

/// D⁻¹ M D.
fn similarity(m: &CsrMatrix, d: &[f64]) -> CsrMatrix {
    let n = m.nrows();
    let mut b = CsrMatrix::builder(n, n);
    for i in 0..n {
        for (j, v) in m.row(i) {
            b.push(j, v * d[j] / d[i]);
        }
        b.finish_row();
    }
    b.build()
}

/// Smallest eigenvalue with positive eigenfunction, by shifted inverse
/// iteration. For Z-matrices the shift is a Collatz–Wielandt lower bound,
/// so the shifted matrix stays a nonsingular M-matrix.
pub fn principal_eigenvalue(op: &AdvectionDiffusionOperator) -> Result<EigenResult> {
    principal_eigenvalue_with(op, &EigenOptions::default())
}

pub fn principal_eigenvalue_with(op: &AdvectionDiffusionOperator, opts: &EigenOptions) -> Result<EigenResult> {
    let m = op.matrix();
    let z_matrix = m.is_z_matrix();
    let (d, balanced) = if z_matrix {
        let d = symmetrizing_scaling(m)?;
        let b = similarity(m, &d);
        (Some(d), b)
    } else {
        (None, m.clone())
    };
    let found = match inverse_iteration(&balanced, z_matrix, opts) {
        Ok(r) => Some(r),
        Err(e) if !z_matrix => return Err(e),
        Err(Error::EigenStagnation { iterations, history }) => match perron_bisection(&balanced, opts.max_iter)? {
            Some(r) => Some(r),
            None => return Err(Error::EigenStagnation { iterations, history }),
        },
        Err(e) => return Err(e),
    };
    let Some(raw) = found else { unreachable!() };
    // back to the original basis
    let mut x = raw.vector;
    if let Some(d) = &d {
        x.iter_mut().zip(d).for_each(|(v, s)| *v *= s);
    }
    let scale = x.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
    x.iter_mut().for_each(|v| *v /= scale);
    let mu = raw.eigenvalue;
    let mx = m.matvec(&x);
    let residual = mx.iter().zip(&x).fold(0.0f64, |a, (l, v)| a.max((l - mu * v).abs())) / mu.abs().max(f64::MIN_POSITIVE);
    Ok(EigenResult {
        eigenvalue: mu,
        eigenfunction: ScalarField::from_unknowns(op.grid(), &x)?,
        residual,
        iterations: raw.iterations,
        bracket: raw.bracket,
    })
}

struct RawEigen {
    eigenvalue: f64,
    vector: Vec<f64>,
    iterations: usize,
    bracket: (f64, f64),
}

fn inverse_iteration(m: &CsrMatrix, z_matrix: bool, opts: &EigenOptions) -> Result<RawEigen> {
    let n = m.nrows();
    let mut x = vec![1.0; n];
    let guard = |s: f64| s - 1e-6 * s.abs().max(1.0);
    let mut sigma = if z_matrix {
        guard(collatz_wielandt(m, &x).map(|b| b.0).unwrap_or(0.0))
    } else {
        0.0
    };
    let mut lu = SparseLu::new(&m.shifted(-sigma))?;
    let mut refactors = 0;
    let mut mu_prev = f64::NAN;
    let mut history = Vec::new();
    let mut mx = vec![0.0; n];
    for it in 1..=opts.max_iter {
        let y = lu.solve(&x)?;
        let (imax, _) = y
            .iter()
            .enumerate()
            .fold((0, 0.0), |(k, best), (i, v)| if v.abs() > best { (i, v.abs()) } else { (k, best) });
        let scale = y[imax];
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::EigenStagnation { iterations: it, history });
        }
        let mu = sigma + dot(&x, &y) / dot(&y, &y);
        x = y.iter().map(|v| v / scale).collect();
        m.matvec_into(&x, &mut mx);
        let res = mx.iter().zip(&x).fold(0.0f64, |a, (l, v)| a.max((l - mu * v).abs())) / mu.abs().max(f64::MIN_POSITIVE);
        history.push(res);
        if history.len() > 8 {
            history.remove(0);
        }
        let change = (mu - mu_prev).abs();
        mu_prev = mu;
        if change <= opts.tol * mu.abs() && res <= opts.residual_tol {
            let bracket = collatz_wielandt(m, &x).unwrap_or((f64::NAN, f64::NAN));
            return Ok(RawEigen {
                eigenvalue: mu,
                vector: x,
                iterations: it,
                bracket,
            });
        }
        if refactors < opts.max_refactor && it % 4 == 0 {
            let mut target = sigma;
            if z_matrix {
                if let Some((lo, _)) = collatz_wielandt(m, &x) {
                    if lo <= mu {
                        target = guard(lo);
                    }
                }
            }
            // Near convergence the estimate itself is a better shift than the
            // Collatz–Wielandt bound, which degrades for localized eigenvectors.
            if res < 1e-3 {
                target = target.max(mu - 2.0 * res * mu.abs());
            }
            // only move when the convergence factor improves noticeably
            if target > sigma + 0.25 * (mu - sigma) && target < mu {
                sigma = target;
                lu = SparseLu::new(&m.shifted(-sigma))?;
                refactors += 1;
            }
        }
    }
    Err(Error::EigenStagnation {
        iterations: opts.max_iter,
        history,
    })
}

/// Perron root of a Z-matrix by bisection: μ < μ₁ exactly when
/// (M − μ)x = 1 has a positive solution. Used when inverse iteration cannot
/// resolve a strongly localized eigenvector. The returned vector is the
/// normalized positive solution at the lower end of the bracket.
fn perron_bisection(m: &CsrMatrix, max_iter: usize) -> Result<Option<RawEigen>> {
    let ones = vec![1.0; m.nrows()];
    let Some((mut lo, mut hi)) = collatz_wielandt(m, &ones) else {
        return Ok(None);
    };
    let positive = |mu: f64| -> Option<Vec<f64>> {
        let lu = SparseLu::new(&m.shifted(-mu)).ok()?;
        let x = lu.solve(&ones).ok()?;
        x.iter().all(|v| *v > 0.0).then_some(x)
    };
    lo -= 1e-9 * lo.abs().max(1.0);
    let Some(mut best) = positive(lo) else {
        return Ok(None);
    };
    let mut it = 0;
    while hi - lo > 1e-12 * hi.abs().max(1.0) && it < max_iter {
        let mid = 0.5 * (lo + hi);
        match positive(mid) {
            Some(x) => {
                lo = mid;
                best = x;
            }
            None => hi = mid,
        }
        it += 1;
    }
    let scale = best.iter().cloned().fold(0.0, f64::max);
    Ok(Some(RawEigen {
        eigenvalue: 0.5 * (lo + hi),
        vector: best.iter().map(|v| v / scale).collect(),
        iterations: it,
        bracket: (lo, hi),
    }))
}
