use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::geometry::Grid2D;

/// Nodal values on a structured grid; non-interior nodes usually hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    origin: [f64; 2],
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid2D) -> Self {
        Self {
            nx: grid.nx(),
            ny: grid.ny(),
            hx: grid.hx(),
            hy: grid.hy(),
            origin: grid.origin(),
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Field from a function of position evaluated at every node.
    pub fn from_fn(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for (k, v) in out.values.iter_mut().enumerate() {
            let (x, y) = grid.node_xy(k);
            *v = f(x, y);
        }
        out
    }

    /// Field from a function evaluated at interior nodes, zero elsewhere.
    pub fn from_fn_interior(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for &k in grid.interior_nodes() {
            let (x, y) = grid.node_xy(k);
            out.values[k] = f(x, y);
        }
        out
    }

    /// Scatters a vector over interior unknowns; other nodes get 0.
    pub fn from_unknowns(grid: &Grid2D, x: &[f64]) -> Result<Self> {
        if x.len() != grid.interior_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} unknowns",
                x.len(),
                grid.interior_count()
            )));
        }
        let mut out = Self::zeros(grid);
        for (&k, &v) in grid.interior_nodes().iter().zip(x) {
            out.values[k] = v;
        }
        Ok(out)
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        let mut out = Self::zeros(grid);
        out.values = values;
        Ok(out)
    }

    /// Gathers the interior unknowns.
    pub fn to_unknowns(&self, grid: &Grid2D) -> Result<Vec<f64>> {
        self.check_grid(grid)?;
        Ok(grid.interior_nodes().iter().map(|&k| self.values[k]).collect())
    }

    pub fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if self.nx != grid.nx() || self.ny != grid.ny() || self.hx != grid.hx() || self.hy != grid.hy() || self.origin != grid.origin() {
            return Err(Error::ShapeMismatch(format!(
                "field is {}x{} cells, grid is {}x{}",
                self.nx,
                self.ny,
                grid.nx(),
                grid.ny()
            )));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn hx(&self) -> f64 {
        self.hx
    }
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.nx + 1) + i]
    }
    pub fn xy(&self, node: usize) -> (f64, f64) {
        let (i, j) = (node % (self.nx + 1), node / (self.nx + 1));
        (self.origin[0] + i as f64 * self.hx, self.origin[1] + j as f64 * self.hy)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
    /// Σ|v| hx hy.
    pub fn norm_l1(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.hx * self.hy
    }
    /// (Σ v² hx hy)^{1/2}.
    pub fn norm_l2(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.hx * self.hy).sqrt()
    }
    pub fn norm_lp(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.norm_inf();
        }
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * self.hx * self.hy).powf(1.0 / p)
    }

    /// Writes `x,y,value` rows after a header line.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,y,value")?;
        for (k, v) in self.values.iter().enumerate() {
            let (x, y) = self.xy(k);
            writeln!(w, "{x:e},{y:e},{v:e}")?;
        }
        Ok(())
    }

    /// Reads `x,y,value` rows (any order) on a uniform lattice.
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut rows = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || (ln == 0 && t.starts_with('x')) {
                continue;
            }
            let parts: Vec<&str> = t.split(',').collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", ln + 1)));
            }
            let mut vals = [0.0; 3];
            for (slot, p) in vals.iter_mut().zip(&parts) {
                *slot = p.trim().parse().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))?;
            }
            rows.push(vals);
        }
        let axis = |c: usize| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (xs, ys) = (axis(0), axis(1));
        if xs.len() < 2 || ys.len() < 2 || xs.len() * ys.len() != rows.len() {
            return Err(Error::Parse("rows do not form a full lattice".into()));
        }
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let hx = (xs[nx] - xs[0]) / nx as f64;
        let hy = (ys[ny] - ys[0]) / ny as f64;
        let mut values = vec![0.0; xs.len() * ys.len()];
        for r in &rows {
            let i = ((r[0] - xs[0]) / hx).round() as usize;
            let j = ((r[1] - ys[0]) / hy).round() as usize;
            values[j * (nx + 1) + i] = r[2];
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            origin: [xs[0], ys[0]],
            values,
        })
    }

    /// Binary dump: nx, ny as u64 then hx, hy, origin x, origin y and the
    /// row-major values as f64, all little endian.
    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.nx as u64).to_le_bytes())?;
        w.write_all(&(self.ny as u64).to_le_bytes())?;
        for v in [self.hx, self.hy, self.origin[0], self.origin[1]] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Self> {
        let mut b8 = [0u8; 8];
        let mut next = |r: &mut dyn Read| -> Result<[u8; 8]> {
            r.read_exact(&mut b8)?;
            Ok(b8)
        };
        let nx = u64::from_le_bytes(next(&mut r)?) as usize;
        let ny = u64::from_le_bytes(next(&mut r)?) as usize;
        let hx = f64::from_le_bytes(next(&mut r)?);
        let hy = f64::from_le_bytes(next(&mut r)?);
        let ox = f64::from_le_bytes(next(&mut r)?);
        let oy = f64::from_le_bytes(next(&mut r)?);
        let n = (nx + 1)
            .checked_mul(ny + 1)
            .filter(|n| *n < 1 << 32)
            .ok_or_else(|| Error::Parse("implausible header".into()))?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            origin: [ox, oy],
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, DomainSpec};

    #[test]
    fn csv_and_binary_round_trip() {
        let g = build_grid(&DomainSpec::Rectangle { lx: 2.0, ly: 1.0 }, 9).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x * x - 0.3 * y);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(ScalarField::read_binary(&buf[..]).unwrap(), f);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let back = ScalarField::read_csv(&csv[..]).unwrap();
        assert_eq!(back.nx(), f.nx());
        for (a, b) in back.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
