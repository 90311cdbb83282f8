use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};
use crate::geometry::grid::Grid2D;
use crate::geometry::stream::{stream_function, StreamFunction};

/// Relative tolerance of the divergence check, in units of max|u|.
pub const DIVERGENCE_TOL: f64 = 1e-6;

/// Where a flow field came from.
#[derive(Clone, Debug)]
pub enum FlowSource {
    Stream(StreamFunction),
    Formula(String),
}

/// Velocity field on a grid.
///
/// Besides nodal velocities the field stores face-averaged normal
/// velocities on the staggered faces between neighbouring nodes; the
/// advection operator is built from these. For stream-derived flows they
/// are differences of Ψ at cell corners, so the discrete divergence
/// vanishes up to roundoff.
#[derive(Clone, Debug)]
pub struct FlowField {
    grid: Grid2D,
    source: FlowSource,
    u: Vec<f64>,
    v: Vec<f64>,
    face_x: Vec<f64>,
    face_y: Vec<f64>,
    incompressible: bool,
    max_speed: f64,
    max_divergence: f64,
    boundary_normal: f64,
}

impl FlowField {
    /// Flow from a stream function: u = Ψ_y, v = −Ψ_x.
    pub fn from_stream(stream: &StreamFunction, grid: &Grid2D) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        let [ox, oy] = grid.origin();
        // corner (a - 1/2, b - 1/2) for a in 0..=nx+1, b in 0..=ny+1
        let cw = nx + 2;
        let mut corner = vec![0.0; (nx + 2) * (ny + 2)];
        for b in 0..ny + 2 {
            let y = oy + (b as f64 - 0.5) * hy;
            for a in 0..nx + 2 {
                let x = ox + (a as f64 - 0.5) * hx;
                corner[b * cw + a] = stream.eval(x, y);
            }
        }
        if let Some(k) = corner.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "stream function '{}' not finite near corner {k}",
                stream.name()
            )));
        }
        let c = |a: usize, b: usize| corner[b * cw + a];
        let mut face_x = vec![0.0; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                face_x[j * nx + i] = (c(i + 1, j + 1) - c(i + 1, j)) / hy;
            }
        }
        let mut face_y = vec![0.0; (nx + 1) * ny];
        for j in 0..ny {
            for i in 0..=nx {
                face_y[j * (nx + 1) + i] = -(c(i + 1, j + 1) - c(i, j + 1)) / hx;
            }
        }
        let n = grid.node_count();
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for k in 0..n {
            let (x, y) = grid.node_xy(k);
            let w = stream.velocity(x, y);
            u[k] = w[0];
            v[k] = w[1];
        }
        Self::finish(grid, FlowSource::Stream(stream.clone()), u, v, face_x, face_y, true)
    }

    /// Flow from a velocity formula. Face velocities are sampled at face
    /// midpoints. Declaring the flow incompressible enables the divergence
    /// check, which fails construction if violated.
    pub fn from_formula(
        grid: &Grid2D,
        name: impl Into<String>,
        velocity: impl Fn(f64, f64) -> [f64; 2],
        incompressible: bool,
    ) -> Result<Self> {
        let (nx, ny) = (grid.nx(), grid.ny());
        let (hx, hy) = (grid.hx(), grid.hy());
        let mut face_x = vec![0.0; nx * (ny + 1)];
        for j in 0..=ny {
            for i in 0..nx {
                face_x[j * nx + i] = velocity(grid.x(i) + 0.5 * hx, grid.y(j))[0];
            }
        }
        let mut face_y = vec![0.0; (nx + 1) * ny];
        for j in 0..ny {
            for i in 0..=nx {
                face_y[j * (nx + 1) + i] = velocity(grid.x(i), grid.y(j) + 0.5 * hy)[1];
            }
        }
        let n = grid.node_count();
        let mut u = vec![0.0; n];
        let mut v = vec![0.0; n];
        for k in 0..n {
            let (x, y) = grid.node_xy(k);
            let w = velocity(x, y);
            u[k] = w[0];
            v[k] = w[1];
        }
        Self::finish(grid, FlowSource::Formula(name.into()), u, v, face_x, face_y, incompressible)
    }

    /// The zero flow.
    pub fn zero(grid: &Grid2D) -> Self {
        Self::from_formula(grid, "zero", |_, _| [0.0, 0.0], true).expect("zero flow is divergence free")
    }

    fn finish(
        grid: &Grid2D,
        source: FlowSource,
        u: Vec<f64>,
        v: Vec<f64>,
        face_x: Vec<f64>,
        face_y: Vec<f64>,
        incompressible: bool,
    ) -> Result<Self> {
        if u.iter().chain(&v).chain(&face_x).chain(&face_y).any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite velocity".into()));
        }
        let max_speed = u
            .iter()
            .zip(&v)
            .map(|(a, b)| a.hypot(*b))
            .chain(face_x.iter().chain(&face_y).map(|w| w.abs()))
            .fold(0.0, f64::max);
        let mut flow = Self {
            grid: grid.clone(),
            source,
            u,
            v,
            face_x,
            face_y,
            incompressible,
            max_speed,
            max_divergence: 0.0,
            boundary_normal: 0.0,
        };
        let (worst, div) = flow.worst_divergence();
        flow.max_divergence = div;
        flow.boundary_normal = flow.boundary_normal_velocity();
        if incompressible {
            let tol = DIVERGENCE_TOL * max_speed;
            if div > tol {
                let (i, j) = grid.node_ij(worst);
                return Err(Error::Divergence {
                    i,
                    j,
                    divergence: div,
                    tolerance: tol,
                });
            }
        }
        Ok(flow)
    }

    /// Discrete divergence at a node from the staggered face velocities.
    pub fn divergence_at(&self, node: usize) -> f64 {
        let g = &self.grid;
        let (i, j) = g.node_ij(node);
        let (nx, ny) = (g.nx(), g.ny());
        if i == 0 || j == 0 || i == nx || j == ny {
            return 0.0;
        }
        (self.face_x[j * nx + i] - self.face_x[j * nx + i - 1]) / g.hx()
            + (self.face_y[j * (nx + 1) + i] - self.face_y[(j - 1) * (nx + 1) + i]) / g.hy()
    }

    fn worst_divergence(&self) -> (usize, f64) {
        let mut best = (0, 0.0);
        for &k in self.grid.interior_nodes() {
            let d = self.divergence_at(k).abs();
            if d > best.1 {
                best = (k, d);
            }
        }
        best
    }

    // Velocity component pointing from each boundary node into the domain.
    fn boundary_normal_velocity(&self) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for k in 0..g.node_count() {
            if g.is_interior(k) {
                continue;
            }
            let (i, j) = g.node_ij(k);
            let dirs = [
                (i < g.nx() && g.is_interior(k + 1), self.u[k]),
                (i > 0 && g.is_interior(k.wrapping_sub(1)), self.u[k]),
                (j < g.ny() && g.is_interior(k + g.row_len()), self.v[k]),
                (j > 0 && g.is_interior(k.wrapping_sub(g.row_len())), self.v[k]),
            ];
            for (adjacent, w) in dirs {
                if adjacent {
                    worst = worst.max(w.abs());
                }
            }
        }
        worst
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn source(&self) -> &FlowSource {
        &self.source
    }
    pub fn name(&self) -> &str {
        match &self.source {
            FlowSource::Stream(s) => s.name(),
            FlowSource::Formula(n) => n,
        }
    }
    pub fn stream(&self) -> Option<&StreamFunction> {
        match &self.source {
            FlowSource::Stream(s) => Some(s),
            FlowSource::Formula(_) => None,
        }
    }
    pub fn u(&self) -> &[f64] {
        &self.u
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    /// Normal velocity on the face between nodes (i, j) and (i+1, j),
    /// stored at `j * nx + i`.
    pub fn face_x(&self) -> &[f64] {
        &self.face_x
    }
    /// Normal velocity on the face between nodes (i, j) and (i, j+1),
    /// stored at `j * (nx + 1) + i`.
    pub fn face_y(&self) -> &[f64] {
        &self.face_y
    }
    pub fn is_incompressible(&self) -> bool {
        self.incompressible
    }
    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }
    pub fn max_divergence(&self) -> f64 {
        self.max_divergence
    }
    /// Largest inward velocity component at boundary nodes.
    pub fn boundary_normal(&self) -> f64 {
        self.boundary_normal
    }
    /// Advisory u·n = 0 flag at the sampled boundary nodes.
    pub fn is_tangent_at_boundary(&self) -> bool {
        self.boundary_normal <= DIVERGENCE_TOL * self.max_speed.max(f64::MIN_POSITIVE)
    }
}

/// Flow field u = (Ψ_y, −Ψ_x) on the grid.
pub fn flow_from_stream_function(stream: &StreamFunction, grid: &Grid2D) -> Result<FlowField> {
    FlowField::from_stream(stream, grid)
}

pub const FLOW_CATALOG: &[&str] = &["sinsin", "fig2", "radial", "shear"];

/// Catalog flows: `sinsin`, `fig2` (stream derived), `radial` (u = 4n x,
/// compressible) and `shear` (u = (c, 0)).
pub fn builtin_flow(entry: &CatalogEntry, grid: &Grid2D) -> Result<FlowField> {
    match entry.name.as_str() {
        "sinsin" | "fig2" => flow_from_stream_function(&stream_function(entry)?, grid),
        "radial" => {
            entry.check_keys(&["n"])?;
            let n = entry.param("n", 1.0)?;
            FlowField::from_formula(grid, "radial", move |x, y| [4.0 * n * x, 4.0 * n * y], false)
        }
        "shear" => {
            entry.check_keys(&["c"])?;
            let c = entry.param("c", 1.0)?;
            FlowField::from_formula(grid, "shear", move |_, _| [c, 0.0], true)
        }
        other => Err(Error::UnknownName {
            name: other.to_string(),
            expected: FLOW_CATALOG.join(", "),
        }),
    }
}
