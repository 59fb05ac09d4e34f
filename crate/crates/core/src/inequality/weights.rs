//! Distance and support weights used by the weighted Korn norms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned rectangle `(x0, x1) × (y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::InvalidInput(format!("degenerate rectangle ({x0},{x1})x({y0},{y1})")));
        }
        Ok(Self { x0, x1, y0, y1 })
    }

    /// `(-a/2, a/2) × (-b/2, b/2)`.
    pub fn centered(a: f64, b: f64) -> Result<Self> {
        Self::new(-a / 2.0, a / 2.0, -b / 2.0, b / 2.0)
    }

    pub fn unit_square() -> Self {
        Self { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    pub fn contains(&self, y: [f64; 2]) -> bool {
        y[0] > self.x0 && y[0] < self.x1 && y[1] > self.y0 && y[1] < self.y1
    }

    pub fn contains_closed(&self, y: [f64; 2]) -> bool {
        y[0] >= self.x0 && y[0] <= self.x1 && y[1] >= self.y0 && y[1] <= self.y1
    }

    /// Distance to the boundary for a point in the closed rectangle.
    pub fn boundary_distance(&self, y: [f64; 2]) -> f64 {
        (y[0] - self.x0).min(self.x1 - y[0]).min(y[1] - self.y0).min(self.y1 - y[1]).max(0.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// `s_h(y) = h + dist(y, ∂ω)`.
pub fn distance_weight(h: f64, omega: &Rect, y: [f64; 2]) -> f64 {
    h + omega.boundary_distance(y)
}

/// `S_hq(y) = (h² + |y|²)^{-q/2} (1 + |ln(h² + |y|²)|)⁻¹`.
pub fn support_weight(h: f64, q: u32, y: [f64; 2]) -> f64 {
    let rho2 = h * h + y[0] * y[0] + y[1] * y[1];
    rho2.powf(-(q as f64) / 2.0) / (1.0 + rho2.ln().abs())
}

/// Maximum of `S_hq(y − yʲ)` over the support centres.
pub fn multi_support_weight(h: f64, q: u32, centers: &[[f64; 2]], y: [f64; 2]) -> f64 {
    centers
        .iter()
        .map(|c| support_weight(h, q, [y[0] - c[0], y[1] - c[1]]))
        .fold(0.0, f64::max)
}

/// Which weight to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightKind {
    Distance,
    Support { q: u32 },
    MultiSupport { q: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub h: f64,
    pub kind: WeightKind,
    pub omega: Rect,
    pub centers: Vec<[f64; 2]>,
}

impl WeightSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidInput("h must be positive".into()));
        }
        match self.kind {
            WeightKind::Support { q } | WeightKind::MultiSupport { q } if q != 1 && q != 2 => {
                return Err(Error::InvalidInput(format!("support weight exponent must be 1 or 2, got {q}")));
            }
            WeightKind::MultiSupport { .. } if self.centers.is_empty() => {
                return Err(Error::InvalidInput("multi-support weight needs at least one centre".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        match self.kind {
            WeightKind::Distance => distance_weight(self.h, &self.omega, y),
            WeightKind::Support { q } => support_weight(self.h, q, y),
            WeightKind::MultiSupport { q } => multi_support_weight(self.h, q, &self.centers, y),
        }
    }
}

/// Smooth cut-off: 1 below 1/2, 0 from 1 on, monotone in between.
pub fn cutoff(r: f64) -> f64 {
    if r <= 0.5 {
        return 1.0;
    }
    if r >= 1.0 {
        return 0.0;
    }
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = f(1.0 - r);
    a / (a + f(r - 0.5))
}

/// Derivative of [`cutoff`].
pub fn cutoff_derivative(r: f64) -> f64 {
    if r <= 0.5 || r >= 1.0 {
        return 0.0;
    }
    // χ = a/(a+b) with a = e^{-1/(1-r)}, b = e^{-1/(r-1/2)}.
    let (s, t) = (1.0 - r, r - 0.5);
    let a = (-1.0 / s).exp();
    let b = (-1.0 / t).exp();
    let da = -a / (s * s);
    let db = b / (t * t);
    (da * b - a * db) / ((a + b) * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_weight_at_centre() {
        let w = distance_weight(0.1, &Rect::unit_square(), [0.5, 0.5]);
        assert!((w - 0.6).abs() < 1e-15);
    }

    #[test]
    fn support_weight_at_origin() {
        let w = support_weight(0.1, 1, [0.0, 0.0]);
        assert!((w - 10.0 / (1.0 + 0.01f64.ln().abs())).abs() < 1e-12);
        assert!((w - 1.78407).abs() < 1e-5);
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.3), 1.0);
        assert_eq!(cutoff(1.2), 0.0);
        let mut prev = 1.0;
        for i in 0..=100 {
            let c = cutoff(0.5 + 0.005 * i as f64);
            assert!(c <= prev + 1e-15);
            prev = c;
        }
        let r = 0.71;
        let fd = (cutoff(r + 1e-6) - cutoff(r - 1e-6)) / 2e-6;
        assert!((fd - cutoff_derivative(r)).abs() < 1e-6);
    }
}
