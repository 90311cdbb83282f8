use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::explosion::SolveStatus;
use crate::freidlin::cells::{default_eps_sep, detect_cells};
use crate::freidlin::coefficients::{level_coefficients_with, CoefficientOptions, LevelCoefficients, TopModel};
use crate::geometry::{Grid2D, Nonlinearity, StreamFunction};

/// Discrete Green operator ψ(h) = ∫₀^{H₀} f T P(min(h, ξ)) dξ on the full
/// node set [0, h₁, …, h_M, H₀].
#[derive(Clone, Debug)]
pub struct GreenKernel {
    nodes: Vec<f64>,
    t: Vec<f64>,
    p_cum: Vec<f64>,
    /// ∫ P over the last segment divided by its length.
    last_p_mean: f64,
}

impl GreenKernel {
    pub fn new(c: &LevelCoefficients) -> Self {
        let m = c.levels.len();
        let mut nodes = Vec::with_capacity(m + 2);
        nodes.push(0.0);
        nodes.extend_from_slice(&c.levels);
        nodes.push(c.h0);
        let mut t = Vec::with_capacity(m + 2);
        t.push(c.t[0]);
        t.extend_from_slice(&c.t);
        t.push(c.t_top);
        let mut p_cum = Vec::with_capacity(m + 2);
        p_cum.push(0.0);
        p_cum.extend_from_slice(&c.p_cum);
        let delta = c.h0 - c.levels[m - 1];
        let (p_end, last_p_mean) = match c.top {
            TopModel::Regular { p_top } => {
                let end = c.p_cum[m - 1] + 0.5 * (1.0 / c.p[m - 1] + 1.0 / p_top) * delta;
                (end, 0.5 * (c.p_cum[m - 1] + end))
            }
            // ∫_a^{H0} ln((H0−a)/(H0−ξ)) dξ = H0 − a
            TopModel::Linear { c: cc, .. } => (f64::INFINITY, c.p_cum[m - 1] + 1.0 / cc),
        };
        p_cum.push(p_end);
        Self {
            nodes,
            t,
            p_cum,
            last_p_mean,
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// ψ on the full nodes for f given on the full nodes.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let n = self.nodes.len();
        debug_assert_eq!(f.len(), n);
        let w: Vec<f64> = f.iter().zip(&self.t).map(|(a, b)| a * b).collect();
        // q1[k] = ∫₀^{x_k} w P, q2[k] = ∫_{x_k}^{H0} w
        let mut q1 = vec![0.0; n];
        let seg_wp = |k: usize| -> f64 {
            let d = self.nodes[k + 1] - self.nodes[k];
            if k == 0 {
                0.5 * w[1] * self.p_cum[1] * d
            } else if k == n - 2 {
                0.5 * (w[k] + w[k + 1]) * self.last_p_mean * d
            } else {
                0.5 * (w[k] * self.p_cum[k] + w[k + 1] * self.p_cum[k + 1]) * d
            }
        };
        let seg_w = |k: usize| -> f64 {
            let d = self.nodes[k + 1] - self.nodes[k];
            if k == 0 {
                w[1] * d
            } else {
                0.5 * (w[k] + w[k + 1]) * d
            }
        };
        for k in 0..n - 1 {
            q1[k + 1] = q1[k] + seg_wp(k);
        }
        let mut q2 = vec![0.0; n];
        for k in (0..n - 1).rev() {
            q2[k] = q2[k + 1] + seg_w(k);
        }
        (0..n)
            .map(|k| if k == n - 1 { q1[k] } else { q1[k] + self.p_cum[k] * q2[k] })
            .collect()
    }
}

/// 1D profile on [0, H₀].
#[derive(Clone, Debug)]
pub struct FreidlinResult {
    /// Full nodes [0, h₁, …, h_M, H₀].
    pub h: Vec<f64>,
    pub phi: Vec<f64>,
    pub status: SolveStatus,
    pub lambda: f64,
    pub iterations: usize,
    pub monotonicity_defect: f64,
}

impl FreidlinResult {
    pub fn sup(&self) -> f64 {
        self.phi.iter().copied().fold(0.0, f64::max)
    }
    /// One-sided difference quotient at H₀.
    pub fn end_slope(&self) -> f64 {
        let n = self.h.len();
        (self.phi[n - 1] - self.phi[n - 2]) / (self.h[n - 1] - self.h[n - 2])
    }
}

/// Solves −(p ψ')' = f T, ψ(0) = 0, ψ' bounded at H₀. `f` is sampled on
/// the levels and extended by constants to 0 and H₀.
pub fn freidlin_linear_solve(coeffs: &LevelCoefficients, f: &[f64]) -> Result<FreidlinResult> {
    if f.len() != coeffs.levels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples for {} levels",
            f.len(),
            coeffs.levels.len()
        )));
    }
    let k = GreenKernel::new(coeffs);
    let mut full = Vec::with_capacity(f.len() + 2);
    full.push(f[0]);
    full.extend_from_slice(f);
    full.push(f[f.len() - 1]);
    Ok(FreidlinResult {
        h: k.nodes().to_vec(),
        phi: k.apply(&full),
        status: SolveStatus::Converged,
        lambda: f64::NAN,
        iterations: 0,
        monotonicity_defect: 0.0,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct FreidlinOptions {
    pub rtol: f64,
    pub tol_inc: f64,
    pub max_iter: usize,
    pub blowup_cap: Option<f64>,
}

impl Default for FreidlinOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-4,
            tol_inc: 1e-10,
            max_iter: 200_000,
            blowup_cap: None,
        }
    }
}

/// Monotone iteration φ̄_{n+1} = G[λ g(φ̄_n)] from 0.
pub fn freidlin_minimal_solution(kernel: &GreenKernel, lambda: f64, g: &Nonlinearity, opts: &FreidlinOptions) -> FreidlinResult {
    let cap = opts.blowup_cap.unwrap_or_else(|| g.default_blowup_cap());
    let n = kernel.nodes().len();
    let mut phi = vec![0.0; n];
    let mut defect: f64 = 0.0;
    let mut status = SolveStatus::IterationLimit;
    let mut iterations = opts.max_iter;
    for it in 1..=opts.max_iter {
        let f: Vec<f64> = phi.iter().map(|v| lambda * g.g(*v)).collect();
        let next = kernel.apply(&f);
        let mut inc: f64 = 0.0;
        let mut sup = f64::NEG_INFINITY;
        for (a, b) in next.iter().zip(&phi) {
            inc = inc.max((a - b).abs());
            defect = defect.max(b - a);
            sup = sup.max(*a);
        }
        phi = next;
        if !sup.is_finite() || sup > cap {
            status = SolveStatus::BlownUp;
            iterations = it;
            break;
        }
        if inc < opts.tol_inc {
            status = SolveStatus::Converged;
            iterations = it;
            break;
        }
    }
    FreidlinResult {
        h: kernel.nodes().to_vec(),
        phi,
        status,
        lambda,
        iterations,
        monotonicity_defect: defect,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FreidlinThreshold {
    pub lambda_star: f64,
    pub bracket: (f64, f64),
    /// Certified lower bound C / sup ψ_unit.
    pub lower_bound: f64,
    pub unit_sup: f64,
    pub probes: Vec<(f64, SolveStatus)>,
}

/// λ̄* for one cell by bisection.
pub fn freidlin_lambda_star(coeffs: &LevelCoefficients, g: &Nonlinearity, opts: &FreidlinOptions) -> Result<FreidlinThreshold> {
    let kernel = GreenKernel::new(coeffs);
    let ones = vec![1.0; kernel.nodes().len()];
    let unit_sup = kernel.apply(&ones).into_iter().fold(0.0, f64::max);
    if !(unit_sup > 0.0 && unit_sup.is_finite()) {
        return Err(Error::Bracket(format!("unit solution has sup {unit_sup}")));
    }
    let lower = g.lower_bound_coefficient() / unit_sup;
    let mut probes = Vec::new();
    let mut probe = |lambda: f64| {
        let r = freidlin_minimal_solution(&kernel, lambda, g, opts);
        probes.push((lambda, r.status));
        r.status == SolveStatus::Converged
    };
    if !probe(lower) {
        return Err(Error::Bracket(format!("no convergence at the certified lower bound {lower}")));
    }
    let mut lo = lower;
    let mut hi = 2.0 * lower;
    let mut guard = 0;
    while probe(hi) {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Bracket("no blow-up found".into()));
        }
    }
    while (hi - lo) / lo > opts.rtol {
        let mid = 0.5 * (lo + hi);
        if probe(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(FreidlinThreshold {
        lambda_star: 0.5 * (lo + hi),
        bracket: (lo, hi),
        lower_bound: lower,
        unit_sup,
        probes,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CellThreshold {
    pub id: usize,
    pub seed: (f64, f64),
    pub h_max: f64,
    pub lambda_star: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiCellThreshold {
    pub cells: Vec<CellThreshold>,
    pub min: f64,
    pub argmin: usize,
}

/// Per-cell λ̄* for every seed and their minimum.
pub fn multi_cell_threshold(
    stream: &StreamFunction,
    grid: &Grid2D,
    seeds: &[(f64, f64)],
    g: &Nonlinearity,
    coeff: &CoefficientOptions,
    opts: &FreidlinOptions,
) -> Result<MultiCellThreshold> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("no cell seeds".into()));
    }
    let cells = detect_cells(stream, grid, seeds, default_eps_sep(stream, grid))?;
    let cells: Vec<CellThreshold> = cells
        .par_iter()
        .map(|c| {
            let coeffs = level_coefficients_with(stream, c, coeff)?;
            let t = freidlin_lambda_star(&coeffs, g, opts)?;
            Ok(CellThreshold {
                id: c.id,
                seed: c.seed,
                h_max: c.h_max,
                lambda_star: t.lambda_star,
            })
        })
        .collect::<Result<_>>()?;
    let (argmin, min) = cells
        .iter()
        .map(|c| (c.id, c.lambda_star))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(MultiCellThreshold { cells, min, argmin })
}
