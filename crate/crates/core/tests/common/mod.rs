//! Independent reference computations used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Torsion function of the unit square, −Δτ = 1, τ = 0 on the boundary,
/// by its double sine series over odd modes.
pub fn torsion_series(x: f64, y: f64, modes: usize) -> f64 {
    let mut acc = 0.0;
    for m in (1..=modes).step_by(2) {
        for n in (1..=modes).step_by(2) {
            let (mf, nf) = (m as f64, n as f64);
            acc += 16.0 / (PI.powi(4) * mf * nf * (mf * mf + nf * nf)) * (mf * PI * x).sin() * (nf * PI * y).sin();
        }
    }
    acc
}

fn rk4(f: impl Fn(f64, [f64; 2]) -> [f64; 2], t0: f64, y0: [f64; 2], t1: f64, steps: usize) -> [f64; 2] {
    let h = (t1 - t0) / steps as f64;
    let mut y = y0;
    let mut t = t0;
    for _ in 0..steps {
        let k1 = f(t, y);
        let k2 = f(t + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
        let k3 = f(t + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
        let k4 = f(t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
    }
    y
}

/// w'' + w'/ρ + e^w = 0, w(0) = w'(0) = 0, integrated to ρ (series start).
fn radial_w(rho: f64) -> f64 {
    let r0 = 1e-4_f64.min(rho);
    // w ≈ −ρ²/4 near 0
    let y0 = [-r0 * r0 / 4.0, -r0 / 2.0];
    if rho <= r0 {
        return y0[0];
    }
    rk4(|r, y| [y[1], -y[1] / r - y[0].exp()], r0, y0, rho, 4000)[0]
}

/// λ* of −Δφ = λ e^φ on the unit disk: max over ρ of ρ² e^{w(ρ)}, where
/// φ(r) = s + w(ρ r) with ρ² = λ e^s and φ(1) = 0.
pub fn disk_gelfand_threshold() -> f64 {
    let lam = |rho: f64| rho * rho * radial_w(rho).exp();
    golden_max(lam, 0.5, 6.0)
}

/// φ(0) on the minimal branch of −Δφ = λ e^φ on the unit disk.
pub fn disk_gelfand_center(lambda: f64) -> f64 {
    // smallest ρ with ρ² e^{w(ρ)} = λ; then s = −w(ρ)
    let f = |rho: f64| rho * rho * radial_w(rho).exp() - lambda;
    let peak = golden_max(|r| r * r * radial_w(r).exp(), 0.5, 6.0);
    let rho_peak = golden_argmax(|r| r * r * radial_w(r).exp(), 0.5, 6.0);
    assert!(lambda < peak);
    let rho = bisect(f, 1e-6, rho_peak);
    -radial_w(rho)
}

/// λ̄* of −φ'' = λ e^φ on [0, 1], φ(0) = 0, φ'(1) = 0, by shooting from
/// the Neumann end: φ(h) = m + w(σ(1 − h)) with w'' = −e^w, σ² = λ e^m.
pub fn neumann_bratu_threshold() -> f64 {
    let w = |sigma: f64| rk4(|_, y| [y[1], -y[0].exp()], 0.0, [0.0, 0.0], sigma, 4000)[0];
    golden_max(|s| s * s * w(s).exp(), 0.1, 5.0)
}

fn golden_argmax(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn golden_max(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let x = golden_argmax(&f, a, b);
    f(x)
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Smallest real eigenvalue of a dense matrix with a positive Perron vector,
/// by unshifted inverse iteration with dense solves.
pub fn dense_principal_eigenvalue(a: &[Vec<f64>], iters: usize) -> f64 {
    let n = a.len();
    let mut x = vec![1.0; n];
    let mut mu = 0.0;
    for _ in 0..iters {
        let y = dense_solve(a.to_vec(), x.clone());
        let num: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
        let den: f64 = y.iter().map(|q| q * q).sum();
        mu = num / den;
        let s = y.iter().cloned().fold(0.0, f64::max);
        x = y.iter().map(|v| v / s).collect();
    }
    mu
}

/// Eigenvalues d − 2√(ab) cos(kπ/(m+1)) of the m×m tridiagonal Toeplitz
/// matrix with diagonal d, sub-diagonal a and super-diagonal b (ab > 0).
pub fn toeplitz_eigenvalue(d: f64, a: f64, b: f64, m: usize, k: usize) -> f64 {
    d - 2.0 * (a * b).sqrt() * (k as f64 * PI / (m as f64 + 1.0)).cos()
}

/// Contour integrals ∮|∇Ψ| dl and ∮ dl/|∇Ψ| of the level set {f = level}
/// restricted to `inside`, by marching squares on an n×n lattice over
/// [x0, x1]×[y0, y1]. Segment midpoints carry the gradient.
pub fn contour_integrals(
    f: impl Fn(f64, f64) -> f64,
    grad: impl Fn(f64, f64) -> [f64; 2],
    inside: impl Fn(f64, f64) -> bool,
    bounds: [f64; 4],
    n: usize,
    level: f64,
) -> (f64, f64) {
    let [x0, x1, y0, y1] = bounds;
    let hx = (x1 - x0) / n as f64;
    let hy = (y1 - y0) / n as f64;
    let val: Vec<Vec<f64>> = (0..=n)
        .map(|i| (0..=n).map(|j| f(x0 + i as f64 * hx, y0 + j as f64 * hy)).collect())
        .collect();
    let mut p = 0.0;
    let mut t = 0.0;
    for i in 0..n {
        for j in 0..n {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mut pts = Vec::new();
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let (va, vb) = (val[a.0][a.1] - level, val[b.0][b.1] - level);
                if (va > 0.0) != (vb > 0.0) {
                    let s = va / (va - vb);
                    let xa = x0 + a.0 as f64 * hx;
                    let ya = y0 + a.1 as f64 * hy;
                    let xb = x0 + b.0 as f64 * hx;
                    let yb = y0 + b.1 as f64 * hy;
                    pts.push((xa + s * (xb - xa), ya + s * (yb - ya)));
                }
            }
            // saddle cells (four crossings) are paired in order; they do not
            // occur away from separatrices
            for seg in pts.chunks(2) {
                if seg.len() < 2 {
                    continue;
                }
                let (pa, pb) = (seg[0], seg[1]);
                let (mx, my) = (0.5 * (pa.0 + pb.0), 0.5 * (pa.1 + pb.1));
                if !inside(mx, my) {
                    continue;
                }
                let len = ((pb.0 - pa.0).powi(2) + (pb.1 - pa.1).powi(2)).sqrt();
                let g = grad(mx, my);
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                p += gn * len;
                t += len / gn;
            }
        }
    }
    (p, t)
}

/// Random smooth stream function: a few separable Fourier modes with
/// random amplitudes, wavenumbers and phases.
pub fn random_stream(seed: u64) -> explosion_core::geometry::StreamFunction {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<[f64; 5]> = (0..3)
        .map(|_| {
            [
                rng.random_range(-1.0..1.0),
                rng.random_range(1..4) as f64,
                rng.random_range(1..4) as f64,
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(0.0..2.0 * PI),
            ]
        })
        .collect();
    explosion_core::geometry::StreamFunction::from_fn(format!("random{seed}"), move |x, y| {
        modes
            .iter()
            .map(|m| m[0] * (m[1] * PI * x + m[3]).sin() * (m[2] * PI * y + m[4]).cos())
            .sum()
    })
}
