use std::io::Write;

use crate::error::{Error, Result};
use crate::fit::line;
use crate::freidlin::cells::{component, nodal_values, CellSpec};
use crate::geometry::StreamFunction;

/// Behaviour of p at the top level H₀.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TopModel {
    /// p(H₀) > 0: P stays finite.
    Regular { p_top: f64 },
    /// p ≈ c (H₀ − h) on levels above `start`.
    Linear { c: f64, start: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct CoefficientOptions {
    /// Uniform levels between 0.1 H₀ and H₀ (at least 32).
    pub n_levels: usize,
    /// Geometric levels 0.1 H₀ 2^{−k}, k = 1..=geometric_levels.
    pub geometric_levels: usize,
    /// Sub-samples per grid spacing and direction.
    pub oversample: usize,
    /// Fraction of uniform levels at the top replaced by the linear model.
    pub top_fraction: f64,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self {
            n_levels: 64,
            geometric_levels: 12,
            oversample: 8,
            top_fraction: 0.05,
        }
    }
}

/// Turnover time T(h), conductivity p(h) and P(h) = ∫₀ʰ ds/p on a level grid.
#[derive(Clone, Debug)]
pub struct LevelCoefficients {
    pub h0: f64,
    /// 0 < h₁ < … < h_M < H₀.
    pub levels: Vec<f64>,
    pub t: Vec<f64>,
    pub p: Vec<f64>,
    /// P at the levels.
    pub p_cum: Vec<f64>,
    /// p(0⁺).
    pub p_zero: f64,
    /// T extrapolated to H₀.
    pub t_top: f64,
    pub top: TopModel,
    /// Index of the first level handled by the top model (levels.len() if none).
    pub model_from: usize,
}

impl LevelCoefficients {
    /// Coefficients from profile functions. If `p(h0) == 0` the top is
    /// treated with the linear model fitted on the upper quarter.
    pub fn from_profiles(h0: f64, levels: Vec<f64>, t: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64, top_fraction: f64) -> Result<Self> {
        let tv: Vec<f64> = levels.iter().map(|&h| t(h)).collect();
        let pv: Vec<f64> = levels.iter().map(|&h| p(h)).collect();
        let p_top = p(h0);
        let t_top = t(h0);
        Self::assemble(h0, levels, tv, pv, p(0.0), t_top, (p_top > 0.0).then_some(p_top), top_fraction)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        h0: f64,
        levels: Vec<f64>,
        t: Vec<f64>,
        p: Vec<f64>,
        p_zero: f64,
        t_top: f64,
        p_top: Option<f64>,
        top_fraction: f64,
    ) -> Result<Self> {
        let m = levels.len();
        if m < 2 || t.len() != m || p.len() != m {
            return Err(Error::InvalidInput("need at least two levels with matching samples".into()));
        }
        if !(levels[0] > 0.0 && levels[m - 1] < h0 && levels.windows(2).all(|w| w[0] < w[1])) {
            return Err(Error::InvalidInput("levels must increase strictly inside (0, H0)".into()));
        }
        if let Some(k) = t.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!("T({}) = {} is not positive", levels[k], t[k])));
        }
        if let Some(k) = p.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!("p({}) = {} is not positive", levels[k], p[k])));
        }
        let (top, model_from) = match p_top {
            Some(pt) => (TopModel::Regular { p_top: pt }, m),
            None => {
                // one-parameter fit p = c (H0 − h) on the upper quarter
                let lo = h0 - 0.25 * (h0 - levels[0].max(0.1 * h0));
                let (mut num, mut den) = (0.0, 0.0);
                for (h, pv) in levels.iter().zip(&p) {
                    if *h >= lo {
                        num += pv * (h0 - h);
                        den += (h0 - h) * (h0 - h);
                    }
                }
                if !(den > 0.0 && num > 0.0) {
                    return Err(Error::InvalidInput("cannot fit the top model of p".into()));
                }
                let c = num / den;
                let uniform = levels.iter().filter(|h| **h >= 0.1 * h0 - 1e-12 * h0).count().max(1);
                let k_model = ((top_fraction * uniform as f64).ceil() as usize).clamp(1, m - 1);
                let from = m - k_model;
                (
                    TopModel::Linear {
                        c,
                        start: levels[from - 1],
                    },
                    from,
                )
            }
        };
        let mut p_cum = vec![0.0; m];
        let p0 = if p_zero > 0.0 { p_zero } else { p[0] };
        p_cum[0] = 0.5 * (1.0 / p0 + 1.0 / p[0]) * levels[0];
        for k in 1..m {
            p_cum[k] = if k >= model_from {
                let TopModel::Linear { c, .. } = top else { unreachable!() };
                let a = levels[model_from - 1];
                p_cum[model_from - 1] + ((h0 - a) / (h0 - levels[k])).ln() / c
            } else {
                p_cum[k - 1] + 0.5 * (1.0 / p[k - 1] + 1.0 / p[k]) * (levels[k] - levels[k - 1])
            };
        }
        Ok(Self {
            h0,
            levels,
            t,
            p,
            p_cum,
            p_zero,
            t_top,
            top,
            model_from,
        })
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Slope of a straight-line fit of raw p over the top 10% of levels.
    pub fn top_slope(&self) -> f64 {
        let m = self.levels.len();
        let k = ((0.1 * m as f64).ceil() as usize).max(3).min(m);
        line(&self.levels[m - k..], &self.p[m - k..]).map(|f| f.1).unwrap_or(f64::NAN)
    }

    /// Writes `h,T,p,P` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "h,T,p,P")?;
        for k in 0..self.levels.len() {
            writeln!(w, "{:e},{:e},{:e},{:e}", self.levels[k], self.t[k], self.p[k], self.p_cum[k])?;
        }
        Ok(())
    }
}

/// Level grid: geometric below 0.1 H₀ then uniform up to H₀.
pub fn level_grid(h0: f64, n_levels: usize, geometric_levels: usize) -> Vec<f64> {
    let mut levels: Vec<f64> = (1..=geometric_levels).rev().map(|k| 0.1 * h0 * 0.5f64.powi(k as i32)).collect();
    levels.extend((0..n_levels).map(|k| 0.1 * h0 + 0.9 * h0 * k as f64 / n_levels as f64));
    levels
}

/// Fewest samples a differencing band may hold before it is widened.
const MIN_BAND_SAMPLES: usize = 16;

struct Samples {
    /// Descending |Ψ| values.
    values: Vec<f64>,
    /// Prefix sums of −sign ΔΨ da, aligned with `values`.
    lap_prefix: Vec<f64>,
    da: f64,
    best: (f64, f64, f64),
}

impl Samples {
    fn count_above(&self, h: f64) -> usize {
        self.values.partition_point(|v| *v >= h)
    }
    fn band_count(&self, h: f64, eps: f64) -> usize {
        self.count_above(h - eps) - self.count_above(h + eps)
    }
    fn area(&self, h: f64) -> f64 {
        self.count_above(h) as f64 * self.da
    }
    fn flux(&self, h: f64) -> f64 {
        let k = self.count_above(h);
        if k == 0 {
            0.0
        } else {
            self.lap_prefix[k - 1]
        }
    }
}

fn sample_cell(stream: &StreamFunction, cell: &CellSpec, oversample: usize) -> Samples {
    let g = &cell.grid;
    let values = nodal_values(stream, g);
    let start = g.nearest_node(cell.seed.0, cell.seed.1);
    let mut region = component(g, &values, cell.sign, 0.0, start);
    // one-node ring so the band between the last node and the separatrix is covered
    let ring: Vec<usize> = (0..g.node_count())
        .filter(|&k| !region[k] && g.neighbours(k).any(|nb| region[nb]))
        .collect();
    for k in ring {
        region[k] = true;
    }
    let m = oversample.max(1);
    let (hx, hy) = (g.hx(), g.hy());
    let [ox, oy] = g.origin();
    let (xmax, ymax) = (g.x(g.nx()), g.y(g.ny()));
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for k in 0..g.node_count() {
        if !region[k] {
            continue;
        }
        let (xc, yc) = g.node_xy(k);
        for b in 0..m {
            let y = yc - 0.5 * hy + (b as f64 + 0.5) * hy / m as f64;
            if y < oy || y > ymax {
                continue;
            }
            for a in 0..m {
                let x = xc - 0.5 * hx + (a as f64 + 0.5) * hx / m as f64;
                if x < ox || x > xmax {
                    continue;
                }
                let v = cell.sign * stream.eval(x, y);
                if v > 0.0 {
                    pairs.push((v, -cell.sign * stream.laplacian(x, y)));
                    if v > best.0 {
                        best = (v, x, y);
                    }
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let da = hx * hy / (m * m) as f64;
    let mut acc = 0.0;
    let lap_prefix = pairs
        .iter()
        .map(|p| {
            acc += p.1 * da;
            acc
        })
        .collect();
    Samples {
        values: pairs.into_iter().map(|p| p.0).collect(),
        lap_prefix,
        da,
        best,
    }
}

// Newton refinement of the extremum of sign·Ψ from a sample point.
fn refine_extremum(stream: &StreamFunction, sign: f64, mut x: f64, mut y: f64) -> f64 {
    let f = |x: f64, y: f64| sign * stream.eval(x, y);
    let mut best = f(x, y);
    for _ in 0..30 {
        let d = 1e-5;
        let g = stream.grad(x, y);
        let gx = stream.grad(x + d, y);
        let gy = stream.grad(x, y + d);
        let (hxx, hxy, hyy) = ((gx[0] - g[0]) / d, 0.5 * ((gx[1] - g[1]) + (gy[0] - g[0])) / d, (gy[1] - g[1]) / d);
        let det = hxx * hyy - hxy * hxy;
        if det.abs() < 1e-300 {
            break;
        }
        let dx = (hyy * g[0] - hxy * g[1]) / det;
        let dy = (-hxy * g[0] + hxx * g[1]) / det;
        let (nx, ny) = (x - dx, y - dy);
        let v = f(nx, ny);
        if !(v >= best) {
            break;
        }
        best = v;
        x = nx;
        y = ny;
        if dx.abs() + dy.abs() < 1e-14 {
            break;
        }
    }
    best
}

/// Co-area coefficients of a cell: p(h) = −∫_{|Ψ|≥h} sign ΔΨ and
/// T(h) = −dA/dh, from an oversampled lattice of the analytic Ψ.
pub fn level_coefficients(stream: &StreamFunction, cell: &CellSpec, n_levels: usize) -> Result<LevelCoefficients> {
    level_coefficients_with(
        stream,
        cell,
        &CoefficientOptions {
            n_levels,
            ..Default::default()
        },
    )
}

pub fn level_coefficients_with(stream: &StreamFunction, cell: &CellSpec, opts: &CoefficientOptions) -> Result<LevelCoefficients> {
    if opts.n_levels < 32 {
        return Err(Error::InvalidInput(format!("need at least 32 levels, got {}", opts.n_levels)));
    }
    let maxima = cell.local_maxima(stream);
    if maxima != 1 {
        return Err(Error::MultiExtremum(
            cell.id,
            format!("{maxima} local extrema of |psi| among member nodes"),
        ));
    }
    let s = sample_cell(stream, cell, opts.oversample);
    if s.values.is_empty() {
        return Err(Error::DegenerateDomain(format!("cell {} has no samples", cell.id)));
    }
    let h0 = refine_extremum(stream, cell.sign, s.best.1, s.best.2).max(s.best.0);
    let levels = level_grid(h0, opts.n_levels, opts.geometric_levels);
    let du = 0.9 * h0 / opts.n_levels as f64;
    let mut kept = Vec::with_capacity(levels.len());
    let mut t = Vec::with_capacity(levels.len());
    let mut p = Vec::with_capacity(levels.len());
    for &h in &levels {
        let geometric = h < 0.1 * h0 * (1.0 - 1e-12);
        let mut eps = if geometric { 0.25 * h } else { 0.5 * du };
        // widen thin bands until they hold enough samples, keeping h - eps >= h/2
        while geometric && s.band_count(h, eps) < MIN_BAND_SAMPLES && 2.0 * eps <= 0.5 * h {
            eps *= 2.0;
        }
        if geometric && s.band_count(h, eps) < MIN_BAND_SAMPLES {
            // below what the sampling resolves
            continue;
        }
        let tv = (s.area(h - eps) - s.area(h + eps)) / (2.0 * eps);
        if !(tv > 0.0) {
            return Err(Error::MultiExtremum(
                cell.id,
                format!("area function not decreasing at level {h:.4e}"),
            ));
        }
        kept.push(h);
        t.push(tv);
        p.push(s.flux(h));
    }
    let p_zero = s.flux(0.0);
    let t_top = *t.last().unwrap();
    LevelCoefficients::assemble(h0, kept, t, p, p_zero, t_top, None, opts.top_fraction)
}
