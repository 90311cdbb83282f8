//! Minimal solutions by monotone iteration, explosion thresholds by
//! bisection, bounds, stability and equidistribution diagnostics.

use serde::Serialize;

use crate::elliptic::{principal_eigenvalue, AdvectionDiffusionOperator, AdvectionScheme, EigenResult, FactorizedOperator, FlowProblem};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{FlowField, Grid2D, Nonlinearity};

/// Relative slack on the upper bound in the sandwich gate.
pub const SANDWICH_SLACK: f64 = 0.05;

#[derive(Clone, Copy, Debug)]
pub struct MinimalSolutionOptions {
    pub tol_inc: f64,
    pub max_iter: usize,
    /// Divergence cap on sup φ; `None` uses 10 K(0.01).
    pub blowup_cap: Option<f64>,
}

impl Default for MinimalSolutionOptions {
    fn default() -> Self {
        Self {
            tol_inc: 1e-10,
            max_iter: 10_000,
            blowup_cap: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    BlownUp,
    IterationLimit,
}

impl SolveStatus {
    pub fn name(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::BlownUp => "blown_up",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimalSolutionResult {
    pub lambda: f64,
    pub status: SolveStatus,
    /// Present when converged.
    pub field: Option<ScalarField>,
    pub iterations: usize,
    pub sup_history: Vec<f64>,
    pub final_increment: f64,
    /// ‖Lφ − λg(φ)‖∞ when converged.
    pub residual: Option<f64>,
    /// Largest pointwise decrease φ_n − φ_{n+1} seen (0 for a monotone run).
    pub monotonicity_defect: f64,
}

impl MinimalSolutionResult {
    pub fn sup(&self) -> f64 {
        self.sup_history.last().copied().unwrap_or(0.0)
    }
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Bounds {
    pub theta: f64,
    pub mu1: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProbeRecord {
    pub lambda: f64,
    pub status: SolveStatus,
    pub sup_phi: f64,
    pub iterations: usize,
    pub monotonicity_defect: f64,
}

#[derive(Clone, Debug)]
pub struct ThresholdResult {
    pub lambda_star: f64,
    /// (largest solved λ, smallest failed λ).
    pub bracket: (f64, f64),
    pub bounds: Bounds,
    pub records: Vec<ProbeRecord>,
    /// True if the search had to go above the upper bound.
    pub expanded: bool,
}

impl ThresholdResult {
    pub fn sandwich_holds(&self) -> bool {
        self.bounds.lower <= self.lambda_star && self.lambda_star <= self.bounds.upper * (1.0 + SANDWICH_SLACK)
    }
    pub fn max_monotonicity_defect(&self) -> f64 {
        self.records.iter().map(|r| r.monotonicity_defect).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ThresholdOptions {
    pub rtol: f64,
    pub minimal: MinimalSolutionOptions,
    pub max_expansions: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            minimal: MinimalSolutionOptions::default(),
            max_expansions: 40,
        }
    }
}

/// Holds the assembled operator and its factorization for repeated
/// nonlinear solves on one (grid, flow, A, scheme).
pub struct ExplosionSolver<'a> {
    problem: FlowProblem<'a>,
    op: AdvectionDiffusionOperator,
    lu: FactorizedOperator,
}

impl<'a> ExplosionSolver<'a> {
    pub fn new(problem: FlowProblem<'a>) -> Result<Self> {
        let op = problem.operator()?;
        let lu = op.factorize()?;
        Ok(Self { problem, op, lu })
    }

    pub fn problem(&self) -> &FlowProblem<'a> {
        &self.problem
    }
    pub fn operator(&self) -> &AdvectionDiffusionOperator {
        &self.op
    }

    /// Exit time τ.
    pub fn exit_time(&self) -> Result<ScalarField> {
        let x = self.lu.solve(&vec![1.0; self.op.dim()])?;
        ScalarField::from_unknowns(self.problem.grid, &x)
    }

    /// Monotone iteration φ_{n+1} = L⁻¹ λ g(φ_n) from φ₀ = 0.
    pub fn minimal_solution(&self, lambda: f64, g: &Nonlinearity, opts: &MinimalSolutionOptions) -> Result<MinimalSolutionResult> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be non-negative, got {lambda}")));
        }
        let cap = opts.blowup_cap.unwrap_or_else(|| g.default_blowup_cap());
        let n = self.op.dim();
        let mut phi = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut history = Vec::new();
        let mut defect: f64 = 0.0;
        let mut inc = f64::INFINITY;
        for it in 1..=opts.max_iter {
            for (r, p) in rhs.iter_mut().zip(&phi) {
                *r = lambda * g.g(*p);
            }
            let next = self.lu.solve(&rhs)?;
            inc = 0.0;
            let mut sup = f64::NEG_INFINITY;
            let mut finite = true;
            for (a, b) in next.iter().zip(&phi) {
                if !a.is_finite() {
                    finite = false;
                    break;
                }
                inc = inc.max((a - b).abs());
                defect = defect.max(b - a);
                sup = sup.max(*a);
            }
            if !finite {
                history.push(f64::INFINITY);
                return Ok(self.finish(lambda, SolveStatus::BlownUp, None, it, history, inc, defect, g));
            }
            history.push(sup.max(0.0));
            phi = next;
            if sup > cap {
                return Ok(self.finish(lambda, SolveStatus::BlownUp, None, it, history, inc, defect, g));
            }
            if inc < opts.tol_inc {
                return Ok(self.finish(lambda, SolveStatus::Converged, Some(phi), it, history, inc, defect, g));
            }
        }
        log::warn!("monotone iteration hit the iteration limit at lambda = {lambda}");
        Ok(self.finish(lambda, SolveStatus::IterationLimit, None, opts.max_iter, history, inc, defect, g))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        lambda: f64,
        status: SolveStatus,
        phi: Option<Vec<f64>>,
        iterations: usize,
        sup_history: Vec<f64>,
        final_increment: f64,
        monotonicity_defect: f64,
        g: &Nonlinearity,
    ) -> MinimalSolutionResult {
        let (field, residual) = match phi {
            Some(phi) => {
                let lphi = self.op.apply(&phi);
                let res = lphi.iter().zip(&phi).fold(0.0f64, |m, (l, p)| m.max((l - lambda * g.g(*p)).abs()));
                (ScalarField::from_unknowns(self.problem.grid, &phi).ok(), Some(res))
            }
            None => (None, None),
        };
        MinimalSolutionResult {
            lambda,
            status,
            field,
            iterations,
            sup_history,
            final_increment,
            residual,
            monotonicity_defect,
        }
    }

    /// θ, μ₁ and the two explicit threshold bounds. If the eigen iteration
    /// fails (possible for non-M-matrix schemes) μ₁ and the upper bound are NaN.
    pub fn bounds(&self, g: &Nonlinearity) -> Result<Bounds> {
        let theta = crate::elliptic::theta(&self.exit_time()?);
        let mu1 = match principal_eigenvalue(&self.op) {
            Ok(e) => e.eigenvalue,
            Err(e) if !self.problem.scheme.is_monotone() => {
                log::warn!("principal eigenvalue unavailable for {} scheme: {e}", self.problem.scheme.name());
                f64::NAN
            }
            Err(e) => return Err(e),
        };
        Ok(Bounds {
            theta,
            mu1,
            lower: g.lower_bound_coefficient() / theta,
            upper: mu1 / g.g_prime(0.0),
        })
    }

    /// λ* by bisection between the explicit bounds.
    pub fn lambda_star(&self, g: &Nonlinearity, opts: &ThresholdOptions) -> Result<ThresholdResult> {
        let bounds = self.bounds(g)?;
        self.lambda_star_from(g, bounds, opts)
    }

    pub fn lambda_star_from(&self, g: &Nonlinearity, bounds: Bounds, opts: &ThresholdOptions) -> Result<ThresholdResult> {
        let mut records = Vec::new();
        let probe = |lambda: f64, records: &mut Vec<ProbeRecord>| -> Result<bool> {
            let r = self.minimal_solution(lambda, g, &opts.minimal)?;
            records.push(ProbeRecord {
                lambda,
                status: r.status,
                sup_phi: r.sup(),
                iterations: r.iterations,
                monotonicity_defect: r.monotonicity_defect,
            });
            Ok(r.converged())
        };
        let mut lo = bounds.lower;
        let mut shrinks = 0;
        while !probe(lo, &mut records)? {
            if self.problem.scheme.is_monotone() || shrinks >= 30 {
                return Err(Error::Bracket(format!("no convergence at the certified lower bound {lo}")));
            }
            log::warn!("lower bound {lo} not solvable for {} scheme; halving", self.problem.scheme.name());
            lo *= 0.5;
            shrinks += 1;
        }
        let mut hi = if bounds.upper.is_finite() && bounds.upper > lo {
            bounds.upper
        } else {
            2.0 * lo
        };
        let mut expanded = false;
        let mut expansions = 0;
        while probe(hi, &mut records)? {
            if expansions >= opts.max_expansions {
                return Err(Error::Bracket(format!("still solvable at lambda = {hi}")));
            }
            if bounds.upper.is_finite() && hi >= bounds.upper {
                log::info!("solvable above the upper bound at lambda = {hi}; expanding");
                expanded = true;
            }
            lo = hi;
            hi *= 1.5;
            expansions += 1;
        }
        while (hi - lo) / lo > opts.rtol {
            let mid = 0.5 * (lo + hi);
            if probe(mid, &mut records)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let result = ThresholdResult {
            lambda_star: 0.5 * (lo + hi),
            bracket: (lo, hi),
            bounds,
            records,
            expanded,
        };
        if !result.sandwich_holds() {
            if self.problem.scheme.is_monotone() {
                return Err(Error::Sandwich {
                    lower: bounds.lower,
                    lambda_star: result.lambda_star,
                    upper: bounds.upper,
                });
            }
            log::warn!(
                "bounds sandwich not satisfied for {} scheme: {} <= {} <= {}",
                self.problem.scheme.name(),
                bounds.lower,
                result.lambda_star,
                bounds.upper
            );
        }
        Ok(result)
    }

    /// κ₁ of −Δ + A u·∇ − λ g'(φ).
    pub fn stability_eigenvalue(&self, lambda: f64, phi: &ScalarField, g: &Nonlinearity) -> Result<EigenResult> {
        let p = phi.to_unknowns(self.problem.grid)?;
        let c: Vec<f64> = p.iter().map(|v| -lambda * g.g_prime(*v)).collect();
        let op = self.problem.operator_with_zero_order(&c)?;
        principal_eigenvalue(&op)
    }
}

/// Minimal solution for the upwind operator on (grid, flow, A).
pub fn minimal_solution(
    grid: &Grid2D,
    flow: &FlowField,
    amplitude: f64,
    lambda: f64,
    g: &Nonlinearity,
    opts: &MinimalSolutionOptions,
) -> Result<MinimalSolutionResult> {
    ExplosionSolver::new(FlowProblem::new(grid, flow, amplitude))?.minimal_solution(lambda, g, opts)
}

/// λ* for the upwind operator on (grid, flow, A).
pub fn lambda_star(grid: &Grid2D, flow: &FlowField, amplitude: f64, g: &Nonlinearity, opts: &ThresholdOptions) -> Result<ThresholdResult> {
    ExplosionSolver::new(FlowProblem::new(grid, flow, amplitude))?.lambda_star(g, opts)
}

/// Bounds C/θ ≤ λ* ≤ μ₁/g'(0).
pub fn threshold_bounds(grid: &Grid2D, flow: &FlowField, amplitude: f64, g: &Nonlinearity) -> Result<Bounds> {
    ExplosionSolver::new(FlowProblem::new(grid, flow, amplitude))?.bounds(g)
}

/// κ₁ of the linearization at a minimal solution.
pub fn stability_eigenvalue(
    grid: &Grid2D,
    flow: &FlowField,
    amplitude: f64,
    lambda: f64,
    phi: &ScalarField,
    g: &Nonlinearity,
) -> Result<EigenResult> {
    ExplosionSolver::new(FlowProblem::new(grid, flow, amplitude))?.stability_eigenvalue(lambda, phi, g)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct UniformBoundRow {
    pub amplitude: f64,
    pub lambda_star: f64,
    pub lambda: f64,
    pub sup_phi: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformBoundReport {
    pub delta: f64,
    pub bound: f64,
    pub rows: Vec<UniformBoundRow>,
    pub worst_margin: f64,
    pub violations: usize,
}

/// Checks sup φ_λ ≤ K(δ) for every converged probe with λ ≤ (1−δ)λ*(A),
/// plus explicit probes at `fractions` of (1−δ)λ*(A).
pub fn uniform_bound_check(
    grid: &Grid2D,
    flow: &FlowField,
    amplitudes: &[f64],
    scheme: AdvectionScheme,
    g: &Nonlinearity,
    delta: f64,
    fractions: &[f64],
    opts: &ThresholdOptions,
) -> Result<UniformBoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")));
    }
    let k = g.uniform_bound(delta);
    let mut rows = Vec::new();
    for &a in amplitudes {
        let solver = ExplosionSolver::new(FlowProblem::new(grid, flow, a).with_scheme(scheme))?;
        let t = solver.lambda_star(g, opts)?;
        let limit = (1.0 - delta) * t.lambda_star;
        let mut push = |lambda: f64, sup: f64| {
            rows.push(UniformBoundRow {
                amplitude: a,
                lambda_star: t.lambda_star,
                lambda,
                sup_phi: sup,
                margin: k - sup,
            })
        };
        for r in t.records.iter().filter(|r| r.status == SolveStatus::Converged && r.lambda <= limit) {
            push(r.lambda, r.sup_phi);
        }
        for &f in fractions {
            let r = solver.minimal_solution(f * limit, g, &opts.minimal)?;
            if r.converged() {
                push(f * limit, r.sup());
            }
        }
    }
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let violations = rows.iter().filter(|r| r.margin < 0.0).count();
    Ok(UniformBoundReport {
        delta,
        bound: k,
        rows,
        worst_margin,
        violations,
    })
}

/// ∫|u·∇φ|² over the interior (midpoint rule, centred fourth-order
/// differences where the stencil fits, second-order next to the frame).
pub fn equidistribution_norm(phi: &ScalarField, flow: &FlowField) -> Result<f64> {
    let grid = flow.grid();
    phi.check_grid(grid)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    let (hx, hy) = (grid.hx(), grid.hy());
    let v = phi.values();
    let row = grid.row_len();
    let d = |k: usize, idx: usize, n: usize, step: usize, h: f64| -> f64 {
        if idx >= 2 && idx + 2 <= n {
            (8.0 * (v[k + step] - v[k - step]) - (v[k + 2 * step] - v[k - 2 * step])) / (12.0 * h)
        } else {
            (v[k + step] - v[k - step]) / (2.0 * h)
        }
    };
    let mut acc = 0.0;
    for &k in grid.interior_nodes() {
        let (i, j) = grid.node_ij(k);
        let w = flow.u()[k] * d(k, i, nx, 1, hx) + flow.v()[k] * d(k, j, ny, row, hy);
        acc += w * w;
    }
    Ok(acc * hx * hy)
}
