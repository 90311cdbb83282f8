use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::geometry::{FlowField, Grid2D};
use crate::sparse::{bicgstab, CsrMatrix, Ilu0, SparseLu};

/// Discretization of the advective term.
///
/// `Upwind` upwinds the face fluxes of the flow: M-matrix structure, and
/// for divergence-free flows zero row and column sums, so implicit Euler
/// steps contract the discrete L¹ norm. `NodalUpwind` picks one-sided
/// differences by the sign of the nodal velocity components; it is also an
/// M-matrix but its column sums are not exactly zero. `Central` is
/// skew-symmetric for divergence-free flows and adds no crosswind
/// diffusion, which matters in the strong-flow limit where upwind smearing
/// couples neighbouring streamlines.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionScheme {
    #[default]
    Upwind,
    NodalUpwind,
    Central,
}

impl AdvectionScheme {
    pub fn name(&self) -> &'static str {
        match self {
            AdvectionScheme::Upwind => "upwind",
            AdvectionScheme::NodalUpwind => "nodal_upwind",
            AdvectionScheme::Central => "central",
        }
    }

    /// Whether the operator is an M-matrix for every flow and amplitude.
    pub fn is_monotone(&self) -> bool {
        !matches!(self, AdvectionScheme::Central)
    }
}

impl std::str::FromStr for AdvectionScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "upwind" => Ok(Self::Upwind),
            "nodal_upwind" => Ok(Self::NodalUpwind),
            "central" => Ok(Self::Central),
            other => Err(Error::UnknownName {
                name: other.into(),
                expected: "upwind, nodal_upwind, central".into(),
            }),
        }
    }
}

/// Grid, flow, amplitude and scheme: everything that fixes the linear
/// operator −Δ + A u·∇.
#[derive(Clone, Copy, Debug)]
pub struct FlowProblem<'a> {
    pub grid: &'a Grid2D,
    pub flow: &'a FlowField,
    pub amplitude: f64,
    pub scheme: AdvectionScheme,
}

impl<'a> FlowProblem<'a> {
    pub fn new(grid: &'a Grid2D, flow: &'a FlowField, amplitude: f64) -> Self {
        Self {
            grid,
            flow,
            amplitude,
            scheme: AdvectionScheme::Upwind,
        }
    }

    pub fn with_scheme(mut self, scheme: AdvectionScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn operator(&self) -> Result<AdvectionDiffusionOperator> {
        assemble_problem(self, None)
    }

    pub fn operator_with_zero_order(&self, c: &[f64]) -> Result<AdvectionDiffusionOperator> {
        assemble_problem(self, Some(c))
    }
}

/// Sparse −Δ + A u·∇ (+ c) over the interior unknowns.
#[derive(Clone, Debug)]
pub struct AdvectionDiffusionOperator {
    grid: Grid2D,
    amplitude: f64,
    scheme: AdvectionScheme,
    matrix: CsrMatrix,
    has_zero_order: bool,
    adjoint: bool,
}

impl AdvectionDiffusionOperator {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
    pub fn scheme(&self) -> AdvectionScheme {
        self.scheme
    }
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn has_zero_order(&self) -> bool {
        self.has_zero_order
    }
    pub fn is_adjoint(&self) -> bool {
        self.adjoint
    }

    /// Operator with the exact transposed matrix.
    pub fn transposed(&self) -> Self {
        Self {
            matrix: self.matrix.transpose(),
            adjoint: !self.adjoint,
            ..self.clone()
        }
    }

    /// Same operator with a different matrix (e.g. I + dt L).
    pub fn with_matrix(&self, matrix: CsrMatrix) -> Self {
        Self { matrix, ..self.clone() }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn factorize(&self) -> Result<FactorizedOperator> {
        Ok(FactorizedOperator {
            lu: SparseLu::new(&self.matrix)?,
        })
    }
}

/// Reusable direct factorization of an operator.
#[derive(Debug)]
pub struct FactorizedOperator {
    lu: SparseLu,
}

impl FactorizedOperator {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.lu.solve(rhs)
    }
}

fn assemble_problem(p: &FlowProblem<'_>, zero_order: Option<&[f64]>) -> Result<AdvectionDiffusionOperator> {
    let grid = p.grid;
    let flow = p.flow;
    let fg = flow.grid();
    // masks may differ (cell sub-domains reuse the parent flow)
    if fg.nx() != grid.nx() || fg.ny() != grid.ny() || fg.hx() != grid.hx() || fg.hy() != grid.hy() || fg.origin() != grid.origin() {
        return Err(Error::ShapeMismatch("flow is defined on a different grid".into()));
    }
    if !p.amplitude.is_finite() {
        return Err(Error::InvalidInput(format!("amplitude {}", p.amplitude)));
    }
    let n = grid.interior_count();
    if let Some(c) = zero_order {
        if c.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "zero-order term has {} entries for {n} unknowns",
                c.len()
            )));
        }
    }
    let (nx, hx, hy) = (grid.nx(), grid.hx(), grid.hy());
    let (ihx2, ihy2) = (1.0 / (hx * hx), 1.0 / (hy * hy));
    let a = p.amplitude;
    let fx = flow.face_x();
    let fy = flow.face_y();
    let row_len = grid.row_len();
    let mut b = CsrMatrix::builder(n, n);
    for (r, &node) in grid.interior_nodes().iter().enumerate() {
        let (i, j) = grid.node_ij(node);
        // (neighbour node, outward normal velocity, 1/h, 1/h²)
        let faces = [
            (node - row_len, -fy[(j - 1) * row_len + i], 1.0 / hy, ihy2),
            (node - 1, -fx[j * nx + i - 1], 1.0 / hx, ihx2),
            (node + 1, fx[j * nx + i], 1.0 / hx, ihx2),
            (node + row_len, fy[j * row_len + i], 1.0 / hy, ihy2),
        ];
        let mut diag = 2.0 * ihx2 + 2.0 * ihy2;
        let mut off = [0.0; 4];
        for (k, &(_, out, ih, ih2)) in faces.iter().enumerate() {
            off[k] = -ih2;
            let f = a * out;
            match p.scheme {
                AdvectionScheme::Upwind => {
                    let inflow = (-f).max(0.0) * ih;
                    diag += inflow;
                    off[k] -= inflow;
                }
                AdvectionScheme::Central => {
                    let c = 0.5 * f * ih;
                    diag -= c;
                    off[k] += c;
                }
                AdvectionScheme::NodalUpwind => {}
            }
        }
        if p.scheme == AdvectionScheme::NodalUpwind {
            // faces are S, W, E, N: a positive component looks back (W or S)
            let (u, v) = (a * flow.u()[node], a * flow.v()[node]);
            let cx = u.abs() / hx;
            let cy = v.abs() / hy;
            diag += cx + cy;
            off[if u > 0.0 { 1 } else { 2 }] -= cx;
            off[if v > 0.0 { 0 } else { 3 }] -= cy;
        }
        if let Some(c) = zero_order {
            diag += c[r];
        }
        for (k, &(nb, ..)) in faces.iter().enumerate() {
            if k == 2 {
                b.push(r, diag);
            }
            if let Some(col) = grid.unknown(nb) {
                b.push(col, off[k]);
            }
        }
        b.finish_row();
    }
    Ok(AdvectionDiffusionOperator {
        grid: grid.clone(),
        amplitude: a,
        scheme: p.scheme,
        matrix: b.build(),
        has_zero_order: zero_order.is_some(),
        adjoint: false,
    })
}

/// Upwind operator −Δ + A u·∇ + c with Dirichlet elimination.
pub fn assemble(grid: &Grid2D, flow: &FlowField, amplitude: f64, zero_order: Option<&ScalarField>) -> Result<AdvectionDiffusionOperator> {
    let c = zero_order.map(|z| z.to_unknowns(grid)).transpose()?;
    assemble_problem(&FlowProblem::new(grid, flow, amplitude), c.as_deref())
}

/// The exact matrix transpose of [`assemble`].
pub fn assemble_adjoint(
    grid: &Grid2D,
    flow: &FlowField,
    amplitude: f64,
    zero_order: Option<&ScalarField>,
) -> Result<AdvectionDiffusionOperator> {
    Ok(assemble(grid, flow, amplitude, zero_order)?.transposed())
}

/// Linear solver selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Direct below [`DIRECT_THRESHOLD`] unknowns, otherwise iterative with
    /// a direct fallback.
    #[default]
    Auto,
    Direct,
    Iterative,
}

pub const DIRECT_THRESHOLD: usize = 10_000;

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub rtol: f64,
    pub max_iter: usize,
    pub method: SolverMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            max_iter: 2000,
            method: SolverMethod::Auto,
        }
    }
}

fn residual_inf(m: &CsrMatrix, x: &[f64], f: &[f64]) -> f64 {
    m.matvec(x).iter().zip(f).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
}

/// Solves `op q = f` on the interior unknowns.
pub fn solve_unknowns(op: &AdvectionDiffusionOperator, f: &[f64], opts: &SolveOptions) -> Result<Vec<f64>> {
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite right-hand side".into()));
    }
    let fnorm = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if fnorm == 0.0 {
        return Ok(vec![0.0; f.len()]);
    }
    let direct = |op: &AdvectionDiffusionOperator| -> Result<Vec<f64>> {
        let lu = op.factorize()?;
        let mut x = lu.solve(f)?;
        // one refinement sweep if roundoff left the residual above rtol
        let res = residual_inf(op.matrix(), &x, f);
        if res > opts.rtol * fnorm {
            let r: Vec<f64> = op.matrix().matvec(&x).iter().zip(f).map(|(a, b)| b - a).collect();
            let dx = lu.solve(&r)?;
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        Ok(x)
    };
    let iterative = |op: &AdvectionDiffusionOperator| -> Result<Vec<f64>> {
        let pre = Ilu0::new(op.matrix())?;
        let mut x = vec![0.0; f.len()];
        bicgstab(op.matrix(), f, &mut x, &pre, opts.rtol, opts.max_iter)?;
        Ok(x)
    };
    match opts.method {
        SolverMethod::Direct => direct(op),
        SolverMethod::Iterative => iterative(op),
        SolverMethod::Auto => {
            if op.dim() < DIRECT_THRESHOLD {
                direct(op)
            } else {
                iterative(op).or_else(|e| {
                    log::warn!("iterative solve failed ({e}); falling back to direct factorization");
                    direct(op)
                })
            }
        }
    }
}

/// Solves `op q = f` with homogeneous Dirichlet data.
pub fn solve(op: &AdvectionDiffusionOperator, f: &ScalarField, opts: &SolveOptions) -> Result<ScalarField> {
    let rhs = f.to_unknowns(op.grid())?;
    let x = solve_unknowns(op, &rhs, opts)?;
    ScalarField::from_unknowns(op.grid(), &x)
}

/// Exit time: −Δτ + A u·∇τ = 1, τ = 0 on the boundary.
pub fn exit_time(grid: &Grid2D, flow: &FlowField, amplitude: f64) -> Result<ScalarField> {
    exit_time_for(&FlowProblem::new(grid, flow, amplitude))
}

pub fn exit_time_for(problem: &FlowProblem<'_>) -> Result<ScalarField> {
    let op = problem.operator()?;
    let ones = vec![1.0; op.dim()];
    let x = solve_unknowns(&op, &ones, &SolveOptions::default())?;
    ScalarField::from_unknowns(problem.grid, &x)
}

/// θ = max τ.
pub fn theta(tau: &ScalarField) -> f64 {
    tau.values().iter().copied().fold(0.0, f64::max)
}
