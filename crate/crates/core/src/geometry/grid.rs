use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    fn contains_closed(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Computational domain description.
///
/// Rectangles have their lower-left corner at the origin, disks are centred
/// at the origin and a union is the union of closed rectangles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainSpec {
    Rectangle { lx: f64, ly: f64 },
    Disk { radius: f64 },
    Union { rects: Vec<Rect> },
}

impl DomainSpec {
    pub fn unit_square() -> Self {
        DomainSpec::Rectangle { lx: 1.0, ly: 1.0 }
    }

    pub fn square(side: f64) -> Self {
        DomainSpec::Rectangle { lx: side, ly: side }
    }

    fn bounding_box(&self) -> Result<Rect> {
        match self {
            DomainSpec::Rectangle { lx, ly } => {
                if !(*lx > 0.0 && *ly > 0.0 && lx.is_finite() && ly.is_finite()) {
                    return Err(Error::InvalidInput(format!("rectangle sides must be positive, got {lx} x {ly}")));
                }
                Ok(Rect::new(0.0, 0.0, *lx, *ly))
            }
            DomainSpec::Disk { radius } => {
                if !(*radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidInput(format!("disk radius must be positive, got {radius}")));
                }
                Ok(Rect::new(-radius, -radius, *radius, *radius))
            }
            DomainSpec::Union { rects } => {
                let mut bb = *rects
                    .first()
                    .ok_or_else(|| Error::DegenerateDomain("union of zero rectangles".into()))?;
                for r in rects {
                    if !(r.x1 > r.x0 && r.y1 > r.y0) {
                        return Err(Error::InvalidInput(format!("empty rectangle {r:?}")));
                    }
                    bb.x0 = bb.x0.min(r.x0);
                    bb.y0 = bb.y0.min(r.y0);
                    bb.x1 = bb.x1.max(r.x1);
                    bb.y1 = bb.y1.max(r.y1);
                }
                Ok(bb)
            }
        }
    }
}

#[derive(Debug)]
struct GridData {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    origin: [f64; 2],
    mask: Vec<bool>,
    unknown_of: Vec<usize>,
    nodes: Vec<usize>,
}

/// Structured node-centred grid with an interior mask.
///
/// Nodes are numbered `j * (nx + 1) + i` with `nx`, `ny` the cell counts.
/// Interior nodes carry the unknowns, in node order; every other node holds
/// homogeneous Dirichlet data. Cloning is cheap.
#[derive(Clone, Debug)]
pub struct Grid2D {
    inner: Arc<GridData>,
}

const NO_UNKNOWN: usize = usize::MAX;

impl PartialEq for Grid2D {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.nx == other.inner.nx
                && self.inner.ny == other.inner.ny
                && self.inner.hx == other.inner.hx
                && self.inner.hy == other.inner.hy
                && self.inner.origin == other.inner.origin
                && self.inner.mask == other.inner.mask)
    }
}

impl Grid2D {
    /// Builds a grid from explicit geometry and mask. Nodes on the outer
    /// frame are never interior.
    pub fn from_mask(nx: usize, ny: usize, hx: f64, hy: f64, origin: [f64; 2], mut mask: Vec<bool>) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 3 cells per direction, got {nx} x {ny}"
            )));
        }
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::InvalidInput(format!("spacings must be positive, got {hx}, {hy}")));
        }
        let n = (nx + 1) * (ny + 1);
        if mask.len() != n {
            return Err(Error::ShapeMismatch(format!("mask has {} entries, grid has {n} nodes", mask.len())));
        }
        for j in 0..=ny {
            for i in 0..=nx {
                if i == 0 || j == 0 || i == nx || j == ny {
                    mask[j * (nx + 1) + i] = false;
                }
            }
        }
        let mut unknown_of = vec![NO_UNKNOWN; n];
        let mut nodes = Vec::new();
        for (k, &m) in mask.iter().enumerate() {
            if m {
                unknown_of[k] = nodes.len();
                nodes.push(k);
            }
        }
        if nodes.is_empty() {
            return Err(Error::DegenerateDomain("no interior nodes".into()));
        }
        Ok(Self {
            inner: Arc::new(GridData {
                nx,
                ny,
                hx,
                hy,
                origin,
                mask,
                unknown_of,
                nodes,
            }),
        })
    }

    /// Same geometry, different mask.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        Self::from_mask(self.nx(), self.ny(), self.hx(), self.hy(), self.origin(), mask)
    }

    pub fn nx(&self) -> usize {
        self.inner.nx
    }
    pub fn ny(&self) -> usize {
        self.inner.ny
    }
    pub fn hx(&self) -> f64 {
        self.inner.hx
    }
    pub fn hy(&self) -> f64 {
        self.inner.hy
    }
    pub fn origin(&self) -> [f64; 2] {
        self.inner.origin
    }
    /// Nodes per row, `nx + 1`.
    pub fn row_len(&self) -> usize {
        self.inner.nx + 1
    }
    pub fn node_count(&self) -> usize {
        (self.inner.nx + 1) * (self.inner.ny + 1)
    }
    pub fn interior_count(&self) -> usize {
        self.inner.nodes.len()
    }
    pub fn mask(&self) -> &[bool] {
        &self.inner.mask
    }
    /// Node indices of the unknowns, in unknown order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.inner.nodes
    }
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.inner.nx + 1) + i
    }
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.inner.nx + 1), node / (self.inner.nx + 1))
    }
    pub fn x(&self, i: usize) -> f64 {
        self.inner.origin[0] + i as f64 * self.inner.hx
    }
    pub fn y(&self, j: usize) -> f64 {
        self.inner.origin[1] + j as f64 * self.inner.hy
    }
    pub fn node_xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(node);
        (self.x(i), self.y(j))
    }
    pub fn is_interior(&self, node: usize) -> bool {
        self.inner.mask[node]
    }
    pub fn unknown(&self, node: usize) -> Option<usize> {
        match self.inner.unknown_of[node] {
            NO_UNKNOWN => None,
            u => Some(u),
        }
    }
    /// Node closest to the point, clamped to the grid.
    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        let fi = ((x - self.inner.origin[0]) / self.inner.hx).round();
        let fj = ((y - self.inner.origin[1]) / self.inner.hy).round();
        let i = fi.clamp(0.0, self.inner.nx as f64) as usize;
        let j = fj.clamp(0.0, self.inner.ny as f64) as usize;
        self.node(i, j)
    }
    pub fn cell_area(&self) -> f64 {
        self.inner.hx * self.inner.hy
    }
    /// Interior 4-neighbours of a node (east, west, north, south order).
    pub fn neighbours(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.node_ij(node);
        let nx = self.inner.nx;
        let ny = self.inner.ny;
        let cands = [
            (i < nx).then(|| node + 1),
            (i > 0).then(|| node - 1),
            (j < ny).then(|| node + nx + 1),
            (j > 0).then(|| node - nx - 1),
        ];
        cands.into_iter().flatten()
    }
}

/// Builds the grid for a domain. `resolution` is the number of nodes along
/// the longer side of the bounding box (at least 8).
pub fn build_grid(domain: &DomainSpec, resolution: usize) -> Result<Grid2D> {
    if resolution < 8 {
        return Err(Error::InvalidInput(format!(
            "resolution must be at least 8 nodes, got {resolution}"
        )));
    }
    let bb = domain.bounding_box()?;
    let (lx, ly) = (bb.x1 - bb.x0, bb.y1 - bb.y0);
    let lmax = lx.max(ly);
    let h = lmax / (resolution - 1) as f64;
    let cells = |l: f64| -> usize {
        if l == lmax {
            resolution - 1
        } else {
            ((l / h).round() as usize).max(3)
        }
    };
    let (nx, ny) = (cells(lx), cells(ly));
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let origin = [bb.x0, bb.y0];
    let mut mask = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        let y = origin[1] + j as f64 * hy;
        for i in 0..=nx {
            let x = origin[0] + i as f64 * hx;
            mask[j * (nx + 1) + i] = match domain {
                DomainSpec::Rectangle { .. } => true,
                DomainSpec::Disk { radius } => x * x + y * y < radius * radius,
                DomainSpec::Union { rects } => {
                    let (dx, dy) = (0.5 * hx, 0.5 * hy);
                    [(0.0, 0.0), (dx, dy), (dx, -dy), (-dx, dy), (-dx, -dy)]
                        .iter()
                        .all(|(ox, oy)| rects.iter().any(|r| r.contains_closed(x + ox, y + oy)))
                }
            };
        }
    }
    Grid2D::from_mask(nx, ny, hx, hy, origin, mask)
}
