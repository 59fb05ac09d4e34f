//! Explicit test fields showing that the weights and constants of the Korn
//! inequalities cannot be improved.
//!
//! All fields are independent of `z`, so plate integrals are `h` times
//! planar integrals. The planar integrals use tensor Gauss rules on axes
//! graded towards the points where the fields concentrate.

use serde::{Deserialize, Serialize};

use super::hardy::Gauss;
use super::weights::{cutoff, cutoff_derivative, multi_support_weight, Rect};
use crate::error::{Error, Result};
use crate::fem::grid::graded_axis;

/// Value and in-plane gradient (`grad[j][k] = ∂_k u_j`, `k = 1, 2`) of a
/// `z`-independent displacement.
pub type PointValue = ([f64; 3], [[f64; 2]; 3]);

/// Mandel strain column of a `z`-independent field.
pub fn planar_strain(grad: &[[f64; 2]; 3]) -> [f64; 6] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        grad[0][0],
        grad[1][1],
        s * (grad[0][1] + grad[1][0]),
        s * grad[2][0],
        s * grad[2][1],
        0.0,
    ]
}

/// Tensor Gauss quadrature over a rectangle, graded towards `foci`.
pub struct PlanarQuadrature {
    pub points: Vec<([f64; 2], f64)>,
}

impl PlanarQuadrature {
    pub fn new(omega: &Rect, foci: &[[f64; 2]], h_min: f64, h_max: f64, order: usize) -> Self {
        let fx: Vec<f64> = foci.iter().map(|f| f[0]).collect();
        let fy: Vec<f64> = foci.iter().map(|f| f[1]).collect();
        let xs = graded_axis(omega.x0, omega.x1, &fx, h_min, 1.15, h_max);
        let ys = graded_axis(omega.y0, omega.y1, &fy, h_min, 1.15, h_max);
        let g = Gauss::new(order);
        let rule = |a: f64, b: f64| g.points(a, b);
        let px: Vec<(f64, f64)> = xs.windows(2).flat_map(|w| rule(w[0], w[1])).collect();
        let py: Vec<(f64, f64)> = ys.windows(2).flat_map(|w| rule(w[0], w[1])).collect();
        let mut points = Vec::with_capacity(px.len() * py.len());
        for &(y, wy) in &py {
            for &(x, wx) in &px {
                points.push(([x, y], wx * wy));
            }
        }
        Self { points }
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.points.iter().map(|(p, w)| w * f(*p)).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// `u₁ = u₂ = ψ(|ln r| / |ln h|)` around one clamped point.
    LogWeight,
    /// `u₁ = Π_j χ(|ln(r_j/R)| / |ln h|)` for several supports.
    LogConstant,
    /// `(1 − χ(r/2hR))(−y₂, y₁, 0)` around a single support.
    Rotation,
}

/// Plate integrals of a witness field at one thickness.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WitnessValues {
    pub kind: WitnessKind,
    pub h: f64,
    /// `‖D(∇)u‖²`.
    pub energy: f64,
    /// `‖u‖²`.
    pub l2: f64,
    /// `Σ_i ‖∇_y u_i‖²` over the two in-plane components.
    pub gradient: f64,
    /// `Σ_i ‖ρ⁻¹ u_i‖²` with `ρ² = h² + r²` (nearest support).
    pub weighted_unlogged: f64,
    /// `Σ_i ‖S_h1 u_i‖²`.
    pub weighted_logged: f64,
}

/// Smooth bump on `(1/2, 1)` used as the profile `ψ`.
pub fn bump(t: f64) -> f64 {
    let s = 4.0 * t - 3.0;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    }
}

pub fn bump_derivative(t: f64) -> f64 {
    let s = 4.0 * t - 3.0;
    if s.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - s * s;
    bump(t) * (-2.0 * s / (q * q)) * 4.0
}

/// `∫ ψ'(t)² dt` over `(1/2, 1)`, by a fine Gauss rule.
pub fn bump_derivative_energy() -> f64 {
    let g = Gauss::new(40);
    (0..64)
        .map(|k| {
            let a = 0.5 + k as f64 / 128.0;
            g.integrate(a, a + 1.0 / 128.0, |t, lw| bump_derivative(t).powi(2) * lw.exp())
        })
        .sum()
}

/// Geometry for the witnesses.
#[derive(Clone, Debug)]
pub struct WitnessGeometry {
    pub omega: Rect,
    pub centers: Vec<[f64; 2]>,
    /// Support radius in units of `h`.
    pub r: f64,
}

impl Default for WitnessGeometry {
    fn default() -> Self {
        Self { omega: Rect::centered(2.0, 2.0).unwrap(), centers: vec![[0.0, 0.0]], r: 1.0 }
    }
}

pub fn evaluate(kind: WitnessKind, geom: &WitnessGeometry, h: f64) -> Result<WitnessValues> {
    if !(h > 0.0 && h < 0.5) {
        return Err(Error::InvalidInput(format!("witness needs 0 < h < 1/2, got {h}")));
    }
    if geom.centers.is_empty() || geom.centers.iter().any(|c| !geom.omega.contains(*c)) {
        return Err(Error::InvalidInput("witness centres must lie inside the plate".into()));
    }
    let lnh = h.ln().abs();
    let centers: &[[f64; 2]] = &geom.centers;
    let nearest = move |y: [f64; 2]| -> ([f64; 2], f64) {
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for c in centers {
            let d = [y[0] - c[0], y[1] - c[1]];
            let r = d[0].hypot(d[1]);
            if r < best.1 {
                best = (d, r);
            }
        }
        best
    };
    let field: Box<dyn Fn([f64; 2]) -> PointValue + '_> = match kind {
        WitnessKind::LogWeight => Box::new(move |y| {
            let (d, r) = nearest(y);
            if r == 0.0 {
                return ([0.0; 3], [[0.0; 2]; 3]);
            }
            let t = r.ln().abs() / lnh;
            let psi = bump(t);
            // ∇t = −sign(ln r)·y/(r²|ln h|); inside the unit disk ln r < 0.
            let sign = if r < 1.0 { -1.0 } else { 1.0 };
            let g = bump_derivative(t) * sign / (r * r * lnh);
            let grad = [g * d[0], g * d[1]];
            ([psi, psi, 0.0], [grad, grad, [0.0, 0.0]])
        }),
        WitnessKind::LogConstant => {
            let centers = geom.centers.clone();
            let rr = geom.r;
            Box::new(move |y| {
                let mut value = 1.0;
                let mut parts = Vec::with_capacity(centers.len());
                for c in &centers {
                    let d = [y[0] - c[0], y[1] - c[1]];
                    let r = d[0].hypot(d[1]);
                    let arg = (r / rr).ln().abs() / lnh;
                    let v = cutoff(arg);
                    let dv = if r > 0.0 {
                        let sign = if r < rr { -1.0 } else { 1.0 };
                        let g = cutoff_derivative(arg) * sign / (r * r * lnh);
                        [g * d[0], g * d[1]]
                    } else {
                        [0.0, 0.0]
                    };
                    value *= v;
                    parts.push((v, dv));
                }
                let mut grad = [0.0, 0.0];
                for (j, (_, dv)) in parts.iter().enumerate() {
                    let others: f64 = parts.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, p)| p.0).product();
                    grad[0] += dv[0] * others;
                    grad[1] += dv[1] * others;
                }
                ([value, 0.0, 0.0], [grad, [0.0, 0.0], [0.0, 0.0]])
            })
        }
        WitnessKind::Rotation => {
            let scale = 2.0 * h * geom.r;
            Box::new(move |y| {
                let (d, r) = nearest(y);
                let s = r / scale;
                let phi = 1.0 - cutoff(s);
                let dphi = if r > 0.0 { -cutoff_derivative(s) / (scale * r) } else { 0.0 };
                let v = [-d[1], d[0]];
                let gphi = [dphi * d[0], dphi * d[1]];
                let grad = [
                    [gphi[0] * v[0], gphi[1] * v[0] - phi],
                    [gphi[0] * v[1] + phi, gphi[1] * v[1]],
                    [0.0, 0.0],
                ];
                ([phi * v[0], phi * v[1], 0.0], grad)
            })
        }
    };
    let quad = PlanarQuadrature::new(&geom.omega, &geom.centers, h * geom.r / 8.0, 0.05, 8);
    let energy = h * quad.integrate(|y| planar_strain(&field(y).1).iter().map(|e| e * e).sum());
    let l2 = h * quad.integrate(|y| field(y).0.iter().map(|v| v * v).sum());
    let gradient = h * quad.integrate(|y| {
        let g = field(y).1;
        g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]
    });
    let weighted_unlogged = h * quad.integrate(|y| {
        let (_, r) = nearest(y);
        let u = field(y).0;
        (u[0] * u[0] + u[1] * u[1]) / (h * h + r * r)
    });
    let weighted_logged = h * quad.integrate(|y| {
        let u = field(y).0;
        multi_support_weight(h, 1, centers, y).powi(2) * (u[0] * u[0] + u[1] * u[1])
    });
    Ok(WitnessValues { kind, h, energy, l2, gradient, weighted_unlogged, weighted_logged })
}

impl WitnessValues {
    /// Lower bound for the free-edge Korn constant from the Rayleigh quotient
    /// of the witness. The field has no vertical component, so the norm
    /// reduces to `Σ_i ‖∇_y u_i‖² + ‖S_h1 u_i‖²`.
    pub fn free_edge_lower_bound(&self) -> f64 {
        ((self.gradient + self.weighted_logged) / self.energy).sqrt()
    }
}

/// `energy·|ln h| / h` of the log-weight witness in closed form:
/// `3π ∫ψ'²`, independent of `h`.
pub fn log_weight_energy_constant() -> f64 {
    3.0 * std::f64::consts::PI * bump_derivative_energy()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivative_matches_differences() {
        for &t in &[0.6, 0.75, 0.9] {
            let fd = (bump(t + 1e-6) - bump(t - 1e-6)) / 2e-6;
            assert!((fd - bump_derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn planar_quadrature_area() {
        let omega = Rect::centered(2.0, 1.0).unwrap();
        let q = PlanarQuadrature::new(&omega, &[[0.1, 0.2]], 0.01, 0.2, 4);
        assert!((q.integrate(|_| 1.0) - 2.0).abs() < 1e-12);
        assert!((q.integrate(|y| y[0] * y[0]) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn log_weight_energy_matches_closed_form() {
        let h = 1e-3;
        let w = evaluate(WitnessKind::LogWeight, &WitnessGeometry::default(), h).unwrap();
        let scaled = w.energy * h.ln().abs() / h;
        let exact = log_weight_energy_constant();
        assert!((scaled - exact).abs() < 1e-4 * exact, "{scaled} vs {exact}");
    }
}
