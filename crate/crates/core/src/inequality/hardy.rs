//! One-dimensional Hardy-type inequalities evaluated on piecewise-linear
//! functions.
//!
//! Each variant compares a weighted `L²` integral of `u` with a weighted
//! integral of `u'`. Quadrature is exact up to Gauss error for the
//! piecewise-linear interpolant: every cell stores the 2x2 matrix of
//! `∫ w N_a N_b` and the scalar `∫ w'`, so evaluating a ratio is one pass over
//! the nodes. Cells touching a singular endpoint use closed-form integrals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HardyVariant {
    /// `∫₀ᵀ x⁻²u² ≤ 4 ∫₀ᵀ u'²`, `u(0) = 0`.
    Classical { t: f64 },
    /// `∫₀ᴿ x⁻¹|ln(x/R)|⁻²u² ≤ 4 ∫₀ᴿ x u'²`, `u(R) = 0`.
    LogOuter { r: f64 },
    /// `∫₀^{R/2} x⁻³|ln(x/R)|⁻²u² ≤ 4 ∫₀^{R/2} x⁻¹|ln(x/R)|⁻²u'²`, `u(0) = 0`.
    LogInner { r: f64 },
    /// `∫₀ᵀ (x+h)⁻⁴u² ≤ (4/9) ∫₀ᵀ (x+h)⁻²u'²`, `u(0) = 0`.
    Shifted { h: f64, t: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ZeroEnd {
    Left,
    Right,
}

impl HardyVariant {
    pub const NAMES: [&'static str; 4] = ["classical", "log-outer", "log-inner", "shifted"];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Classical { .. } => "classical",
            Self::LogOuter { .. } => "log-outer",
            Self::LogInner { .. } => "log-inner",
            Self::Shifted { .. } => "shifted",
        }
    }

    /// Variant with its default parameters (unit interval, `h = 0.1`).
    pub fn by_name(name: &str, h: f64) -> Result<Self> {
        match name {
            "classical" => Ok(Self::Classical { t: 1.0 }),
            "log-outer" => Ok(Self::LogOuter { r: 1.0 }),
            "log-inner" => Ok(Self::LogInner { r: 1.0 }),
            "shifted" => Ok(Self::Shifted { h, t: 1.0 }),
            other => Err(Error::InvalidInput(format!(
                "unknown hardy variant '{other}', expected one of {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Classical { t } => t > 0.0,
            Self::LogOuter { r } | Self::LogInner { r } => r > 0.0,
            Self::Shifted { h, t } => h > 0.0 && t > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid parameters for {self}")))
        }
    }

    pub fn constant(&self) -> f64 {
        match self {
            Self::Shifted { .. } => 4.0 / 9.0,
            _ => 4.0,
        }
    }

    pub fn interval(&self) -> (f64, f64) {
        match *self {
            Self::Classical { t } | Self::Shifted { t, .. } => (0.0, t),
            Self::LogOuter { r } => (0.0, r),
            Self::LogInner { r } => (0.0, r / 2.0),
        }
    }

    pub fn zero_end(&self) -> ZeroEnd {
        match self {
            Self::LogOuter { .. } => ZeroEnd::Right,
            _ => ZeroEnd::Left,
        }
    }

    fn ln_abs_log(x: f64, r: f64) -> f64 {
        (x / r).ln().abs().ln()
    }

    /// Logarithm of the weight on `u²`.
    pub fn ln_value_weight(&self, x: f64) -> f64 {
        match *self {
            Self::Classical { .. } => -2.0 * x.ln(),
            Self::LogOuter { r } => -x.ln() - 2.0 * Self::ln_abs_log(x, r),
            Self::LogInner { r } => -3.0 * x.ln() - 2.0 * Self::ln_abs_log(x, r),
            Self::Shifted { h, .. } => -4.0 * (x + h).ln(),
        }
    }

    /// Logarithm of the weight on `u'²`.
    pub fn ln_derivative_weight(&self, x: f64) -> f64 {
        match *self {
            Self::Classical { .. } => 0.0,
            Self::LogOuter { .. } => x.ln(),
            Self::LogInner { r } => -x.ln() - 2.0 * Self::ln_abs_log(x, r),
            Self::Shifted { h, .. } => -2.0 * (x + h).ln(),
        }
    }
}

impl fmt::Display for HardyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Classical { t } => write!(f, "classical(T={t})"),
            Self::LogOuter { r } => write!(f, "log-outer(R={r})"),
            Self::LogInner { r } => write!(f, "log-inner(R={r})"),
            Self::Shifted { h, t } => write!(f, "shifted(h={h}, T={t})"),
        }
    }
}

impl FromStr for HardyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::by_name(s, 0.1)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on
/// the Legendre polynomial.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let legendre = |x: f64| {
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, n as f64 * (x * p1 - p0) / (x * x - 1.0))
    };
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(x);
        xs.push(x);
        ws.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

pub(crate) struct Gauss {
    xs: Vec<f64>,
    ws: Vec<f64>,
}

impl Gauss {
    pub(crate) fn new(n: usize) -> Self {
        let (xs, ws) = gauss_legendre(n);
        Self { xs, ws }
    }

    /// Physical nodes and weights on `[a, b]`.
    pub(crate) fn points(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.xs.iter().zip(&self.ws).map(|(x, w)| (mid + half * x, half * w)).collect()
    }

    /// `∫_a^b f`, where `f` receives the point and the log of its quadrature
    /// weight so that huge weights can be combined in log space.
    pub(crate) fn integrate(&self, a: f64, b: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.xs.iter().zip(&self.ws).map(|(x, w)| f(mid + half * x, (half * w).ln())).sum()
    }
}

/// Per-cell quadrature data for one variant on one grid.
pub struct HardyQuadrature {
    variant: HardyVariant,
    nodes: Vec<f64>,
    /// `[∫wN₀N₀, ∫wN₀N₁, ∫wN₁N₁]` per cell.
    value: Vec<[f64; 3]>,
    /// `∫w'` per cell.
    derivative: Vec<f64>,
    quadrature_error: f64,
}

impl HardyQuadrature {
    pub fn new(variant: HardyVariant, nodes: Vec<f64>) -> Result<Self> {
        variant.validate()?;
        let (a, b) = variant.interval();
        if nodes.len() < 3 {
            return Err(Error::InvalidInput("need at least three nodes".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("nodes must be strictly increasing".into()));
        }
        let tol = 1e-12 * (b - a);
        if (nodes[0] - a).abs() > tol || (nodes[nodes.len() - 1] - b).abs() > tol {
            return Err(Error::InvalidInput(format!("nodes must span [{a}, {b}]")));
        }
        let fine = Gauss::new(10);
        let coarse = Gauss::new(6);
        let (value, derivative) = Self::cells(&variant, &nodes, &fine);
        let (value_c, derivative_c) = Self::cells(&variant, &nodes, &coarse);
        let mut err: f64 = 0.0;
        for (f, c) in value.iter().zip(&value_c) {
            for k in 0..3 {
                let s = f[k].abs().max(1e-300);
                err = err.max((f[k] - c[k]).abs() / s);
            }
        }
        for (f, c) in derivative.iter().zip(&derivative_c) {
            err = err.max((f - c).abs() / f.abs().max(1e-300));
        }
        Ok(Self { variant, nodes, value, derivative, quadrature_error: err })
    }

    pub fn uniform(variant: HardyVariant, cells: usize) -> Result<Self> {
        let (a, b) = variant.interval();
        let nodes = (0..=cells).map(|i| a + (b - a) * i as f64 / cells as f64).collect();
        Self::new(variant, nodes)
    }

    /// Geometric grid `x_k = end·qᵏ` refined towards the left endpoint down
    /// to `x_min`, plus the endpoint itself.
    pub fn geometric(variant: HardyVariant, q: f64, x_min: f64) -> Result<Self> {
        let (a, b) = variant.interval();
        if !(q > 0.0 && q < 1.0) || !(x_min > 0.0 && x_min < b) {
            return Err(Error::InvalidInput("geometric grid needs 0 < q < 1 and 0 < x_min < end".into()));
        }
        let mut nodes = vec![b];
        let mut x = b;
        while x * q > x_min {
            x *= q;
            nodes.push(x);
        }
        nodes.push(a);
        nodes.reverse();
        Self::new(variant, nodes)
    }

    fn cells(v: &HardyVariant, nodes: &[f64], g: &Gauss) -> (Vec<[f64; 3]>, Vec<f64>) {
        let n = nodes.len();
        let mut value = Vec::with_capacity(n - 1);
        let mut derivative = Vec::with_capacity(n - 1);
        for c in 0..n - 1 {
            let (xa, xb) = (nodes[c], nodes[c + 1]);
            let len = xb - xa;
            let first = c == 0;
            let last = c == n - 2;
            let shape = |x: f64| ((xb - x) / len, (x - xa) / len);
            let generic = |k: usize| {
                g.integrate(xa, xb, |x, lw| {
                    let (n0, n1) = shape(x);
                    let p = match k {
                        0 => n0 * n0,
                        1 => n0 * n1,
                        _ => n1 * n1,
                    };
                    (v.ln_value_weight(x) + lw).exp() * p
                })
            };
            let entries = match (*v, first, last) {
                // The first node is pinned to zero: only the N₁N₁ entry matters.
                (HardyVariant::Classical { .. }, true, _) => [0.0, 0.0, 1.0 / xb],
                (HardyVariant::LogInner { r }, true, _) => [0.0, 0.0, 1.0 / (xb * xb * (xb / r).ln().abs())],
                (HardyVariant::Shifted { .. }, true, _) => [0.0, 0.0, generic(2)],
                (HardyVariant::LogOuter { r }, true, _) => {
                    // Moments Iₖ = ∫₀^{x₁} xᵏ w with w = x⁻¹ ln⁻²(x/R); I₀ is
                    // closed form, I₁ and I₂ are smooth after x = x₁s⁴.
                    let i0 = 1.0 / (xb / r).ln().abs();
                    let moment = |k: i32| {
                        g.integrate(0.0, 1.0, |s, lw| {
                            let x = xb * s.powi(4);
                            let jac = 4.0 * xb * s.powi(3);
                            if jac == 0.0 {
                                return 0.0;
                            }
                            x.powi(k - 1) / (x / r).ln().powi(2) * jac * lw.exp()
                        })
                    };
                    let (i1, i2) = (moment(1), moment(2));
                    [i0 - 2.0 * i1 / xb + i2 / (xb * xb), i1 / xb - i2 / (xb * xb), i2 / (xb * xb)]
                }
                (HardyVariant::LogOuter { .. }, _, true) => [generic(0), 0.0, 0.0],
                _ => [generic(0), generic(1), generic(2)],
            };
            value.push(entries);
            let d = match (*v, first) {
                (HardyVariant::LogInner { r }, true) => 1.0 / (xb / r).ln().abs(),
                _ => g.integrate(xa, xb, |x, lw| (v.ln_derivative_weight(x) + lw).exp()),
            };
            derivative.push(d);
        }
        (value, derivative)
    }

    pub fn variant(&self) -> HardyVariant {
        self.variant
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Largest relative change of any cell integral between two Gauss rules.
    pub fn quadrature_error(&self) -> f64 {
        self.quadrature_error
    }

    /// Weighted `L²` side and derivative side for nodal values `u`.
    pub fn integrals(&self, u: &[f64]) -> Result<(f64, f64)> {
        if u.len() != self.nodes.len() {
            return Err(Error::InvalidInput(format!("expected {} nodal values, got {}", self.nodes.len(), u.len())));
        }
        let end = match self.variant.zero_end() {
            ZeroEnd::Left => u[0],
            ZeroEnd::Right => u[u.len() - 1],
        };
        if end != 0.0 {
            return Err(Error::InvalidInput(format!(
                "{} requires u to vanish at its {} endpoint",
                self.variant,
                if self.variant.zero_end() == ZeroEnd::Left { "left" } else { "right" }
            )));
        }
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for c in 0..self.value.len() {
            let (a, b) = (u[c], u[c + 1]);
            let q = &self.value[c];
            lhs += q[0] * a * a + 2.0 * q[1] * a * b + q[2] * b * b;
            let slope = (b - a) / (self.nodes[c + 1] - self.nodes[c]);
            rhs += slope * slope * self.derivative[c];
        }
        Ok((lhs, rhs))
    }

    /// `lhs / rhs`, defined as 0 for `u ≡ 0`.
    pub fn ratio(&self, u: &[f64]) -> Result<f64> {
        let (lhs, rhs) = self.integrals(u)?;
        if rhs == 0.0 {
            return if lhs == 0.0 { Ok(0.0) } else { Err(Error::InvalidInput("zero derivative integral".into())) };
        }
        Ok(lhs / rhs)
    }

    pub fn ratio_of(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        let mut u: Vec<f64> = self.nodes.iter().map(|&x| f(x)).collect();
        match self.variant.zero_end() {
            ZeroEnd::Left => u[0] = 0.0,
            ZeroEnd::Right => *u.last_mut().unwrap() = 0.0,
        }
        self.ratio(&u)
    }
}

/// Analytic ratio of the classical variant for `u = x^α` on `(0, 1)`.
pub fn power_law_ratio(alpha: f64) -> f64 {
    1.0 / (alpha * alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_rule_integrates_polynomials() {
        let g = Gauss::new(6);
        let v = g.integrate(0.0, 2.0, |x, lw| x.powi(11) * lw.exp());
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-9);
    }

    #[test]
    fn linear_function_has_unit_ratio() {
        let q = HardyQuadrature::uniform(HardyVariant::Classical { t: 1.0 }, 1000).unwrap();
        let r = q.ratio_of(|x| x).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
    }

    #[test]
    fn zero_function_has_zero_ratio() {
        let q = HardyQuadrature::uniform(HardyVariant::LogOuter { r: 1.0 }, 100).unwrap();
        assert_eq!(q.ratio(&vec![0.0; 101]).unwrap(), 0.0);
    }

    #[test]
    fn wrong_endpoint_is_rejected() {
        let q = HardyQuadrature::uniform(HardyVariant::Classical { t: 1.0 }, 10).unwrap();
        let u: Vec<f64> = (0..11).map(|i| 1.0 + i as f64).collect();
        assert!(q.ratio(&u).is_err());
    }
}
