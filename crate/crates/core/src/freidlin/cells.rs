use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::{Grid2D, StreamFunction};

/// One flow cell of a stream function on a grid.
#[derive(Clone, Debug)]
pub struct CellSpec {
    pub id: usize,
    pub seed: (f64, f64),
    /// +1 for a maximum cell, −1 for a minimum cell.
    pub sign: f64,
    /// Member node with the largest |Ψ|.
    pub extremum: (f64, f64),
    /// H = |Ψ| at the extremum node.
    pub h_max: f64,
    /// Node mask over the parent grid.
    pub members: Vec<bool>,
    pub member_count: usize,
    pub grid: Grid2D,
}

/// 0.02 max|Ψ| over interior nodes.
pub fn default_eps_sep(stream: &StreamFunction, grid: &Grid2D) -> f64 {
    0.02 * grid
        .interior_nodes()
        .iter()
        .map(|&k| {
            let (x, y) = grid.node_xy(k);
            stream.eval(x, y).abs()
        })
        .fold(0.0, f64::max)
}

/// 4-connected component of interior nodes with sign·Ψ > eps containing `start`.
pub(crate) fn component(grid: &Grid2D, values: &[f64], sign: f64, eps: f64, start: usize) -> Vec<bool> {
    let mut mask = vec![false; grid.node_count()];
    let inside = |k: usize| grid.is_interior(k) && sign * values[k] > eps;
    if !inside(start) {
        return mask;
    }
    let mut queue = VecDeque::from([start]);
    mask[start] = true;
    while let Some(k) = queue.pop_front() {
        for nb in grid.neighbours(k) {
            if !mask[nb] && inside(nb) {
                mask[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    mask
}

pub(crate) fn nodal_values(stream: &StreamFunction, grid: &Grid2D) -> Vec<f64> {
    (0..grid.node_count())
        .map(|k| {
            let (x, y) = grid.node_xy(k);
            stream.eval(x, y)
        })
        .collect()
}

/// Flood-fills the component of {|Ψ| > eps_sep} around each seed.
pub fn detect_cells(stream: &StreamFunction, grid: &Grid2D, seeds: &[(f64, f64)], eps_sep: f64) -> Result<Vec<CellSpec>> {
    if !(eps_sep >= 0.0) {
        return Err(Error::InvalidInput(format!("eps_sep must be non-negative, got {eps_sep}")));
    }
    let values = nodal_values(stream, grid);
    let mut owner = vec![usize::MAX; grid.node_count()];
    let mut cells = Vec::with_capacity(seeds.len());
    for (id, &(x, y)) in seeds.iter().enumerate() {
        let node = grid.nearest_node(x, y);
        let v = values[node];
        if v.abs() <= eps_sep || !grid.is_interior(node) {
            return Err(Error::SeedOnSeparatrix {
                x,
                y,
                value: v.abs(),
                eps: eps_sep,
            });
        }
        if owner[node] != usize::MAX {
            return Err(Error::AmbiguousCells {
                first: owner[node],
                second: id,
            });
        }
        let sign = v.signum();
        let members = component(grid, &values, sign, eps_sep, node);
        let mut best = (node, 0.0);
        let mut count = 0;
        for (k, &m) in members.iter().enumerate() {
            if m {
                owner[k] = id;
                count += 1;
                if values[k].abs() > best.1 {
                    best = (k, values[k].abs());
                }
            }
        }
        cells.push(CellSpec {
            id,
            seed: (x, y),
            sign,
            extremum: grid.node_xy(best.0),
            h_max: best.1,
            members,
            member_count: count,
            grid: grid.clone(),
        });
    }
    Ok(cells)
}

impl CellSpec {
    /// Number of strict local maxima of |Ψ| among member nodes.
    pub fn local_maxima(&self, stream: &StreamFunction) -> usize {
        let g = &self.grid;
        let val = |k: usize| {
            let (x, y) = g.node_xy(k);
            self.sign * stream.eval(x, y)
        };
        let mut count = 0;
        for k in 0..g.node_count() {
            if !self.members[k] {
                continue;
            }
            let v = val(k);
            let (i, j) = g.node_ij(k);
            let mut is_max = true;
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (a, b) = (i as i64 + di, j as i64 + dj);
                    if a < 0 || b < 0 || a > g.nx() as i64 || b > g.ny() as i64 {
                        continue;
                    }
                    let nb = g.node(a as usize, b as usize);
                    if self.members[nb] && val(nb) >= v {
                        is_max = false;
                    }
                }
            }
            if is_max {
                count += 1;
            }
        }
        count
    }

    /// The cell as its own Dirichlet domain: the component of strict sign
    /// (no separatrix trimming) containing the seed.
    pub fn domain(&self, stream: &StreamFunction) -> Result<Grid2D> {
        let values = nodal_values(stream, &self.grid);
        let start = self.grid.nearest_node(self.seed.0, self.seed.1);
        let tiny = 1e-9 * self.h_max;
        let mask = component(&self.grid, &values, self.sign, tiny, start);
        self.grid.with_mask(mask)
    }
}
