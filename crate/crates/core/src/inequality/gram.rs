//! Gram matrices of the rigid-motion basis `d(ξ)` over boxes and cylinders.
//!
//! `d(ξ)ᵀd(ξ)` is quadratic in `ξ`, so each Gram matrix is determined by the
//! volume, first and second moments of the region, which are exact for
//! boxes and circular cylinders.

use crate::dense::Mat;

/// Rigid displacement matrix `d(ξ)`: translations in columns 1–3 and
/// infinitesimal rotations in columns 4–6.
pub fn rigid_matrix(xi: [f64; 3]) -> [[f64; 6]; 3] {
    [
        [1.0, 0.0, 0.0, 0.0, xi[2], -xi[1]],
        [0.0, 1.0, 0.0, -xi[2], 0.0, xi[0]],
        [0.0, 0.0, 1.0, xi[1], -xi[0], 0.0],
    ]
}

/// Volume, first moments `∫ξ_k` and second moments `∫ξ_kξ_l` of a region.
#[derive(Clone, Copy, Debug)]
pub struct Moments {
    pub volume: f64,
    pub first: [f64; 3],
    pub second: [[f64; 3]; 3],
}

impl Moments {
    pub fn box_region(lo: [f64; 3], hi: [f64; 3]) -> Self {
        let len = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let volume = len[0] * len[1] * len[2];
        let mean = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
        let mut second = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                second[k][l] = volume * mean[k] * mean[l];
            }
            second[k][k] += volume * len[k] * len[k] / 12.0;
        }
        Self { volume, first: mean.map(|m| m * volume), second }
    }

    /// Vertical cylinder `|y − c| < radius`, `z ∈ (z0, z1)`.
    pub fn cylinder(center: [f64; 2], radius: f64, z0: f64, z1: f64) -> Self {
        let height = z1 - z0;
        let volume = std::f64::consts::PI * radius * radius * height;
        let mean = [center[0], center[1], 0.5 * (z0 + z1)];
        let spread = [radius * radius / 4.0, radius * radius / 4.0, height * height / 12.0];
        let mut second = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                second[k][l] = volume * mean[k] * mean[l];
            }
            second[k][k] += volume * spread[k];
        }
        Self { volume, first: mean.map(|m| m * volume), second }
    }
}

/// `∫ d(ξ)ᵀ d(ξ) dξ` from the moments of the region.
pub fn gram(m: &Moments) -> Mat<f64> {
    // d(ξ) = d₀ + Σ_k ξ_k d_k with constant 3x6 matrices.
    let d0 = rigid_matrix([0.0; 3]);
    let mut dk = [[[0.0; 6]; 3]; 3];
    for (k, slot) in dk.iter_mut().enumerate() {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        let d = rigid_matrix(e);
        for r in 0..3 {
            for c in 0..6 {
                slot[r][c] = d[r][c] - d0[r][c];
            }
        }
    }
    Mat::from_fn(6, 6, |a, b| {
        let mut s = 0.0;
        for r in 0..3 {
            s += m.volume * d0[r][a] * d0[r][b];
            for k in 0..3 {
                s += m.first[k] * (d0[r][a] * dk[k][r][b] + dk[k][r][a] * d0[r][b]);
                for l in 0..3 {
                    s += m.second[k][l] * dk[k][r][a] * dk[l][r][b];
                }
            }
        }
        s
    })
}

/// The half cube `(-1/2, 1/2)² × (-1/4, 1/4)`.
pub fn half_cube_gram() -> Mat<f64> {
    gram(&Moments::box_region([-0.5, -0.5, -0.25], [0.5, 0.5, 0.25]))
}

/// Gram matrix of the support cylinder `|y − yʲ| < hR/2`, `|ζ| < 1/2`, in
/// unstretched in-plane and stretched vertical coordinates.
pub fn support_cylinder_gram(center: [f64; 2], h: f64, r: f64) -> Mat<f64> {
    gram(&Moments::cylinder(center, h * r / 2.0, -0.5, 0.5))
}

/// Leading term `vol·(d(yʲ,0)ᵀd(yʲ,0) + tᵀt/12)` of the support-cylinder
/// Gram matrix, where `t` selects the two tilting rotations.
pub fn support_cylinder_leading(center: [f64; 2], h: f64, r: f64) -> Mat<f64> {
    let vol = std::f64::consts::PI * h * h * r * r / 4.0;
    let d = rigid_matrix([center[0], center[1], 0.0]);
    Mat::from_fn(6, 6, |a, b| {
        let mut s: f64 = (0..3).map(|k| d[k][a] * d[k][b]).sum();
        if a == b && (a == 3 || a == 4) {
            s += 1.0 / 12.0;
        }
        vol * s
    })
}

/// `ℳ(h) = Σ_j 𝐝(support cylinder j)`.
pub fn support_matrix(centers: &[[f64; 2]], h: f64, r: f64) -> Mat<f64> {
    let mut m = Mat::zeros(6, 6);
    for c in centers {
        m = m.add(&support_cylinder_gram(*c, h, r));
    }
    m
}

/// Spectral norm of the inverse of a symmetric positive definite matrix.
pub fn inverse_norm(m: &Mat<f64>) -> f64 {
    let eig = m.to_nalgebra().symmetric_eigen();
    1.0 / eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_cube_is_diagonal() {
        let g = half_cube_gram();
        assert!((g[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((g[(3, 3)] - 5.0 / 96.0).abs() < 1e-15);
        for a in 0..6 {
            for b in 0..6 {
                if a != b {
                    assert_eq!(g[(a, b)], 0.0);
                }
            }
        }
    }
}
