use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};

/// A scalar stream function Ψ(x, y); the velocity is (Ψ_y, −Ψ_x).
pub trait StreamFn: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;

    /// ∇Ψ; defaults to centred differences.
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let dx = 1e-6 * x.abs().max(1.0);
        let dy = 1e-6 * y.abs().max(1.0);
        [
            (self.value(x + dx, y) - self.value(x - dx, y)) / (2.0 * dx),
            (self.value(x, y + dy) - self.value(x, y - dy)) / (2.0 * dy),
        ]
    }

    /// ΔΨ; defaults to centred differences.
    fn laplacian(&self, x: f64, y: f64) -> f64 {
        let dx = 1e-4 * x.abs().max(1.0);
        let dy = 1e-4 * y.abs().max(1.0);
        let c = self.value(x, y);
        (self.value(x + dx, y) - 2.0 * c + self.value(x - dx, y)) / (dx * dx)
            + (self.value(x, y + dy) - 2.0 * c + self.value(x, y - dy)) / (dy * dy)
    }

    fn is_analytic(&self) -> bool {
        false
    }
}

/// Shared, named stream function.
#[derive(Clone)]
pub struct StreamFunction {
    name: String,
    f: Arc<dyn StreamFn>,
}

impl fmt::Debug for StreamFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StreamFunction").field("name", &self.name).finish()
    }
}

impl StreamFunction {
    pub fn new(name: impl Into<String>, f: impl StreamFn + 'static) -> Self {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    /// Stream function from a plain closure; derivatives by finite differences.
    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(name, FnStream(f))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.f.value(x, y)
    }
    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        self.f.gradient(x, y)
    }
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        self.f.laplacian(x, y)
    }
    pub fn is_analytic(&self) -> bool {
        self.f.is_analytic()
    }
    /// Velocity (Ψ_y, −Ψ_x).
    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let g = self.grad(x, y);
        [g[1], -g[0]]
    }
}

struct FnStream<F>(F);

impl<F: Fn(f64, f64) -> f64 + Send + Sync> StreamFn for FnStream<F> {
    fn value(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

/// `a sin(πx/L) sin(πy/L)`: cells of side `L`.
#[derive(Clone, Copy, Debug)]
pub struct SinSin {
    pub amplitude: f64,
    pub cell: f64,
}

impl StreamFn for SinSin {
    fn value(&self, x: f64, y: f64) -> f64 {
        let k = PI / self.cell;
        self.amplitude * (k * x).sin() * (k * y).sin()
    }
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let k = PI / self.cell;
        let a = self.amplitude * k;
        [a * (k * x).cos() * (k * y).sin(), a * (k * x).sin() * (k * y).cos()]
    }
    fn laplacian(&self, x: f64, y: f64) -> f64 {
        let k = PI / self.cell;
        -2.0 * k * k * self.value(x, y)
    }
    fn is_analytic(&self) -> bool {
        true
    }
}

/// Four-cell flow on `[0, 2π]²` with unequal cells:
/// `sin(2π (x/π)³/8) sin(2π (y/π)²/4)`.
#[derive(Clone, Copy, Debug)]
pub struct FourCell;

impl FourCell {
    fn parts(x: f64, y: f64) -> ([f64; 3], [f64; 3]) {
        let s = x / PI;
        let t = y / PI;
        let a = [0.25 * PI * s * s * s, 0.75 * s * s, 1.5 * s / PI];
        let b = [0.5 * PI * t * t, t, 1.0 / PI];
        (a, b)
    }

    /// Separatrix positions `(π 4^{1/3}, π √2)`.
    pub fn separatrices() -> (f64, f64) {
        (PI * 4f64.cbrt(), PI * 2f64.sqrt())
    }
}

impl StreamFn for FourCell {
    fn value(&self, x: f64, y: f64) -> f64 {
        let (a, b) = Self::parts(x, y);
        a[0].sin() * b[0].sin()
    }
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let (a, b) = Self::parts(x, y);
        [a[1] * a[0].cos() * b[0].sin(), b[1] * a[0].sin() * b[0].cos()]
    }
    fn laplacian(&self, x: f64, y: f64) -> f64 {
        let (a, b) = Self::parts(x, y);
        let (sa, ca, sb, cb) = (a[0].sin(), a[0].cos(), b[0].sin(), b[0].cos());
        (a[2] * ca - a[1] * a[1] * sa) * sb + sa * (b[2] * cb - b[1] * b[1] * sb)
    }
    fn is_analytic(&self) -> bool {
        true
    }
}

/// `H0 (1 − r²/R²)`, one cell on the disk of radius `R`.
#[derive(Clone, Copy, Debug)]
pub struct Paraboloid {
    pub h0: f64,
    pub radius: f64,
}

impl StreamFn for Paraboloid {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.h0 * (1.0 - (x * x + y * y) / (self.radius * self.radius))
    }
    fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        let c = -2.0 * self.h0 / (self.radius * self.radius);
        [c * x, c * y]
    }
    fn laplacian(&self, _x: f64, _y: f64) -> f64 {
        -4.0 * self.h0 / (self.radius * self.radius)
    }
    fn is_analytic(&self) -> bool {
        true
    }
}

pub const STREAM_CATALOG: &[&str] = &["sinsin", "fig2", "paraboloid"];

/// Looks up a catalog stream function by name.
pub fn stream_function(entry: &CatalogEntry) -> Result<StreamFunction> {
    match entry.name.as_str() {
        "sinsin" => {
            entry.check_keys(&["amplitude", "cell"])?;
            let cell = entry.param("cell", 1.0)?;
            if cell <= 0.0 {
                return Err(Error::BadParameter {
                    entry: entry.name.clone(),
                    param: "cell".into(),
                    reason: "must be positive".into(),
                });
            }
            Ok(StreamFunction::new(
                "sinsin",
                SinSin {
                    amplitude: entry.param("amplitude", 1.0)?,
                    cell,
                },
            ))
        }
        "fig2" => {
            entry.check_keys(&[])?;
            Ok(StreamFunction::new("fig2", FourCell))
        }
        "paraboloid" => {
            entry.check_keys(&["h0", "radius"])?;
            let radius = entry.param("radius", 1.0)?;
            if radius <= 0.0 {
                return Err(Error::BadParameter {
                    entry: entry.name.clone(),
                    param: "radius".into(),
                    reason: "must be positive".into(),
                });
            }
            Ok(StreamFunction::new(
                "paraboloid",
                Paraboloid {
                    h0: entry.param("h0", 1.0)?,
                    radius,
                },
            ))
        }
        other => Err(Error::UnknownName {
            name: other.to_string(),
            expected: STREAM_CATALOG.join(", "),
        }),
    }
}
