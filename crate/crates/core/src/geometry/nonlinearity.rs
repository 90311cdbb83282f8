use std::fmt;
use std::sync::Arc;

use crate::catalog::CatalogEntry;
use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Exponential,
    Power(f64),
    Custom { g: ScalarFn, gp: ScalarFn },
}

/// Reaction term g with its transform h(s) = ∫₀ˢ ds'/g(s').
#[derive(Clone)]
pub struct Nonlinearity {
    name: String,
    kind: Kind,
    h_inf: f64,
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name)
            .field("h_infinity", &self.h_inf)
            .finish()
    }
}

/// Quadrature and inversion tolerance for user-supplied g.
pub const CUSTOM_TOL: f64 = 1e-12;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

impl Nonlinearity {
    pub fn exponential() -> Self {
        Self {
            name: "exponential".into(),
            kind: Kind::Exponential,
            h_inf: 1.0,
        }
    }

    /// g(s) = (1 + s)^m with m > 1.
    pub fn power(m: f64) -> Result<Self> {
        if !(m > 1.0 && m.is_finite()) {
            return Err(Error::BadParameter {
                entry: "power".into(),
                param: "m".into(),
                reason: format!("need m > 1 for a finite h_infinity, got {m}"),
            });
        }
        Ok(Self {
            name: "power".into(),
            kind: Kind::Power(m),
            h_inf: 1.0 / (m - 1.0),
        })
    }

    /// User-supplied g and g'. Checks g(0) > 0, monotonicity and convexity
    /// on [0, 100], and finiteness of h_infinity.
    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g_prime: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let name = name.into();
        let g: ScalarFn = Arc::new(g);
        let gp: ScalarFn = Arc::new(g_prime);
        let bad = |reason: String| Error::BadParameter {
            entry: name.clone(),
            param: "g".into(),
            reason,
        };
        if !(g(0.0) > 0.0) {
            return Err(bad(format!("g(0) = {} must be positive", g(0.0))));
        }
        let ds = 0.05;
        for k in 0..=2000 {
            let s = k as f64 * ds;
            if gp(s) < 0.0 {
                return Err(bad(format!("g'({s}) < 0")));
            }
            if k >= 1 && k < 2000 {
                let second = g(s + ds) - 2.0 * g(s) + g(s - ds);
                if second < -1e-9 * g(s).abs().max(1.0) {
                    return Err(bad(format!("g not convex near s = {s}")));
                }
            }
        }
        let inv = |s: f64| 1.0 / g(s);
        let mut total = 0.0;
        let mut prev_inc = f64::NAN;
        let mut lo = 0.0;
        let mut hi = 1.0;
        let mut h_inf = f64::INFINITY;
        for _ in 0..1000 {
            let inc = simpson(&inv, lo, hi, CUSTOM_TOL);
            total += inc;
            if prev_inc.is_finite() && prev_inc > 0.0 {
                let r = inc / prev_inc;
                if r < 1.0 {
                    let tail = inc * r / (1.0 - r);
                    if tail < 1e-13 * total || inc == 0.0 {
                        h_inf = total + tail;
                        break;
                    }
                }
            }
            if !hi.is_finite() || hi > 1e300 {
                break;
            }
            prev_inc = inc;
            lo = hi;
            hi *= 2.0;
        }
        if !h_inf.is_finite() {
            return Err(bad("integral of 1/g diverges (h_infinity infinite)".into()));
        }
        Ok(Self {
            name,
            kind: Kind::Custom { g, gp },
            h_inf,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Exponential => s.exp(),
            Kind::Power(m) => (1.0 + s).powf(*m),
            Kind::Custom { g, .. } => g(s),
        }
    }

    pub fn g_prime(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Exponential => s.exp(),
            Kind::Power(m) => m * (1.0 + s).powf(m - 1.0),
            Kind::Custom { gp, .. } => gp(s),
        }
    }

    pub fn h_infinity(&self) -> f64 {
        self.h_inf
    }

    /// h(s) = ∫₀ˢ 1/g.
    pub fn h(&self, s: f64) -> f64 {
        match &self.kind {
            Kind::Exponential => -(-s).exp_m1(),
            Kind::Power(m) => -((1.0 - m) * s.ln_1p()).exp_m1() / (m - 1.0),
            Kind::Custom { g, .. } => {
                let inv = |t: f64| 1.0 / g(t);
                // dyadic panels keep the local error controlled for large s
                let mut acc = 0.0;
                let mut a = 0.0;
                let mut b = s.min(1.0);
                while a < s {
                    acc += simpson(&inv, a, b, CUSTOM_TOL);
                    a = b;
                    b = (2.0 * b).min(s);
                }
                acc
            }
        }
    }

    /// Inverse of h on [0, h_infinity); returns +inf at or above h_infinity.
    pub fn h_inv(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        if y >= self.h_inf {
            return f64::INFINITY;
        }
        match &self.kind {
            Kind::Exponential => -(-y).ln_1p(),
            Kind::Power(m) => (-(-(m - 1.0) * y).ln_1p() / (m - 1.0)).exp_m1(),
            Kind::Custom { .. } => self.invert_monotone(y, |s| self.h(s)),
        }
    }

    /// Inverse of g on [g(0), ∞).
    pub fn g_inv(&self, y: f64) -> f64 {
        match &self.kind {
            Kind::Exponential => y.ln(),
            Kind::Power(m) => y.powf(1.0 / m) - 1.0,
            Kind::Custom { g, .. } => self.invert_monotone(y, |s| g(s)),
        }
    }

    fn invert_monotone(&self, y: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while f(hi) < y {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= CUSTOM_TOL * hi.max(1e-300) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// C with λ* ≥ C/θ: the largest λθ such that 2g(0) ≥ g(2g(0)λθ).
    pub fn lower_bound_coefficient(&self) -> f64 {
        let g0 = self.g(0.0);
        self.g_inv(2.0 * g0) / (2.0 * g0)
    }

    /// K(δ) = h⁻¹(((1−δ)/(1−δ/3)) h_infinity).
    pub fn uniform_bound(&self, delta: f64) -> f64 {
        self.h_inv((1.0 - delta) / (1.0 - delta / 3.0) * self.h_inf)
    }

    /// Default divergence cap for monotone iterations: 10 K(0.01).
    pub fn default_blowup_cap(&self) -> f64 {
        let k = self.uniform_bound(0.01);
        if k.is_finite() {
            10.0 * k
        } else {
            1e6
        }
    }
}

/// Φ(s) = h⁻¹((λ₀/λ₁) h(s)).
pub fn phi_transform(g: &Nonlinearity, lambda0: f64, lambda1: f64, s: f64) -> Result<f64> {
    if !(lambda0 > 0.0 && lambda0 < lambda1) {
        return Err(Error::InvalidInput(format!("need 0 < lambda0 < lambda1, got {lambda0}, {lambda1}")));
    }
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("need s >= 0, got {s}")));
    }
    let v = g.h_inv(lambda0 / lambda1 * g.h(s));
    if !v.is_finite() {
        return Err(Error::Bracket(format!("h inverse failed at s = {s}")));
    }
    Ok(v)
}

pub const NONLINEARITY_CATALOG: &[&str] = &["exponential", "power"];

/// Catalog nonlinearities: `exponential` (e^s) and `power` ((1+s)^m, m > 1).
pub fn nonlinearity(entry: &CatalogEntry) -> Result<Nonlinearity> {
    match entry.name.as_str() {
        "exponential" => {
            entry.check_keys(&[])?;
            Ok(Nonlinearity::exponential())
        }
        "power" => {
            entry.check_keys(&["m"])?;
            Nonlinearity::power(entry.param("m", 2.0)?)
        }
        other => Err(Error::UnknownName {
            name: other.to_string(),
            expected: NONLINEARITY_CATALOG.join(", "),
        }),
    }
}
