//! Finite element estimates of weighted Korn constants for thin plates.
//!
//! For a plate `ω × (−h/2, h/2)` clamped on a set `Γ`, the best constant in
//! `|||u||| ≤ K ‖D(∇)u‖` is `K = λ_min^{-1/2}` where `λ_min` is the smallest
//! eigenvalue of the energy form relative to the norm form on the clamped
//! finite element space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::weights::{distance_weight, multi_support_weight, Rect};
use crate::elastic::StiffnessMatrix;
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_elastic, assemble_form, FormTerm, Probe};
use crate::fem::constrained::DofMap;
use crate::fem::eigen::{smallest_eigenpair, EigenOptions};
use crate::fem::grid::{graded_axis, HexGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClampMode {
    /// Clamped on the lateral side and on the support disks.
    LateralAndSupports,
    /// Clamped on the support disks only; the lateral side is free.
    SupportsOnly,
}

impl fmt::Display for ClampMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::LateralAndSupports => "lateral",
            Self::SupportsOnly => "supports",
        })
    }
}

impl FromStr for ClampMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lateral" | "lateral+support" => Ok(Self::LateralAndSupports),
            "supports" | "supports-only" => Ok(Self::SupportsOnly),
            other => Err(Error::InvalidInput(format!("unknown clamp mode '{other}' (lateral|supports)"))),
        }
    }
}

/// Which anisotropic norm sits on the left of the Korn inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormVariant {
    /// Unweighted anisotropic norm with powers of `h`.
    Plain,
    /// Weighted by `s_h = h + dist(y, ∂ω)`.
    Lateral,
    /// Weighted by `s_h` and the support weights `S_h1`, `S_h2`.
    Weighted,
    /// Support weights only (`s_h = 1`), maximised over several supports.
    FreeEdge,
}

impl fmt::Display for NormVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Plain => "plain",
            Self::Lateral => "lateral",
            Self::Weighted => "weighted",
            Self::FreeEdge => "free-edge",
        })
    }
}

impl FromStr for NormVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "lateral" => Ok(Self::Lateral),
            "weighted" => Ok(Self::Weighted),
            "free-edge" => Ok(Self::FreeEdge),
            other => Err(Error::InvalidInput(format!("unknown norm '{other}' (plain|lateral|weighted|free-edge)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportLayout {
    pub omega: Rect,
    pub centers: Vec<[f64; 2]>,
    /// Radius of each clamped disk in units of `h`.
    pub radius: f64,
    pub clamp: ClampMode,
}

impl SupportLayout {
    /// Square plate `(−1/2, 1/2)²` with one support at the centre.
    pub fn single_centered(clamp: ClampMode) -> Self {
        Self { omega: Rect::centered(1.0, 1.0).unwrap(), centers: vec![[0.0, 0.0]], radius: 1.0, clamp }
    }

    /// Square plate with `j` supports spread along the `y₁` axis.
    pub fn spread(j: usize, clamp: ClampMode) -> Self {
        let centers = match j {
            0 => vec![],
            1 => vec![[0.0, 0.0]],
            _ => (0..j).map(|k| [-0.25 + 0.5 * k as f64 / (j - 1) as f64, 0.0]).collect(),
        };
        Self { omega: Rect::centered(1.0, 1.0).unwrap(), centers, radius: 1.0, clamp }
    }

    pub fn validate(&self, h: f64) -> Result<()> {
        if !(h > 0.0) || !(self.radius > 0.0) {
            return Err(Error::InvalidInput("h and the support radius must be positive".into()));
        }
        if self.centers.is_empty() && self.clamp == ClampMode::SupportsOnly {
            return Err(Error::InvalidInput("supports-only clamping needs at least one support".into()));
        }
        for (i, c) in self.centers.iter().enumerate() {
            let rho = self.radius * h;
            let inside = c[0] - rho > self.omega.x0
                && c[0] + rho < self.omega.x1
                && c[1] - rho > self.omega.y0
                && c[1] + rho < self.omega.y1;
            if !inside {
                return Err(Error::InvalidInput(format!("support {i} is not inside the plate at h = {h}")));
            }
            for d in &self.centers[..i] {
                if (c[0] - d[0]).hypot(c[1] - d[1]) <= 2.0 * rho {
                    return Err(Error::InvalidInput(format!("support {i} overlaps another support")));
                }
            }
        }
        Ok(())
    }
}

/// Mesh policy. All spacings scale with `h`, so the number of elements
/// across the thickness and across a support is the same for every `h`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KornMesh {
    pub layers: usize,
    /// Spacing near supports (and clamped edges) as a multiple of `h·min(1, R)`.
    pub core: f64,
    pub growth: f64,
    /// Largest in-plane spacing as a multiple of `h`.
    pub far: f64,
}

impl Default for KornMesh {
    fn default() -> Self {
        Self { layers: 3, core: 0.5, growth: 1.3, far: 2.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KornEstimate {
    pub h: f64,
    pub supports: usize,
    pub clamp: ClampMode,
    pub norm: NormVariant,
    pub k: f64,
    pub mesh_cells: usize,
    pub dofs: usize,
    pub eig_residual: f64,
    pub iterations: usize,
}

pub struct KornProblem {
    pub grid: HexGrid,
    pub map: DofMap,
    pub energy: crate::fem::sparse::CsrMatrix,
    pub norm: crate::fem::sparse::CsrMatrix,
}

fn norm_terms(
    variant: NormVariant,
    layout: &SupportLayout,
    h: f64,
) -> impl Fn([f64; 3], [f64; 3]) -> Vec<FormTerm> + '_ {
    move |c: [f64; 3], _size: [f64; 3]| {
        let y = [c[0], c[1]];
        let (s, s1, s2) = match variant {
            NormVariant::Plain => (1.0, 1.0, 1.0),
            NormVariant::Lateral => (distance_weight(h, &layout.omega, y), 1.0, 1.0),
            NormVariant::Weighted => (
                distance_weight(h, &layout.omega, y),
                multi_support_weight(h, 1, &layout.centers, y),
                multi_support_weight(h, 2, &layout.centers, y),
            ),
            NormVariant::FreeEdge => (
                1.0,
                multi_support_weight(h, 1, &layout.centers, y),
                multi_support_weight(h, 2, &layout.centers, y),
            ),
        };
        let h2 = h * h;
        let t = |comp, probe, coeff| FormTerm { comp, probe, coeff };
        let mut v = Vec::with_capacity(12);
        for i in 0..2 {
            v.push(t(i, Probe::D(0), 1.0));
            v.push(t(i, Probe::D(1), 1.0));
            v.push(t(i, Probe::D(2), h2 * s1 * s1 / (s * s)));
            v.push(t(i, Probe::Value, s1 * s1 / (s * s)));
        }
        v.push(t(2, Probe::D(0), h2 * s1 * s1 / (s * s)));
        v.push(t(2, Probe::D(1), h2 * s1 * s1 / (s * s)));
        v.push(t(2, Probe::D(2), 1.0));
        v.push(t(2, Probe::Value, h2 * s2 * s2 / s.powi(4)));
        v
    }
}

impl KornProblem {
    pub fn build(layout: &SupportLayout, a: &StiffnessMatrix<f64>, variant: NormVariant, h: f64, mesh: &KornMesh) -> Result<Self> {
        layout.validate(h)?;
        if mesh.layers < 1 || !(mesh.core > 0.0) || !(mesh.far >= mesh.core) || !(mesh.growth >= 1.0) {
            return Err(Error::InvalidInput("invalid korn mesh parameters".into()));
        }
        let h_min = mesh.core * h * layout.radius.min(1.0);
        if h_min > layout.radius * h {
            return Err(Error::InvalidInput("mesh does not resolve the supports (fewer than 2 elements across)".into()));
        }
        let mut fx: Vec<f64> = layout.centers.iter().map(|c| c[0]).collect();
        let mut fy: Vec<f64> = layout.centers.iter().map(|c| c[1]).collect();
        if layout.clamp == ClampMode::LateralAndSupports {
            fx.extend([layout.omega.x0, layout.omega.x1]);
            fy.extend([layout.omega.y0, layout.omega.y1]);
        }
        let xs = graded_axis(layout.omega.x0, layout.omega.x1, &fx, h_min, mesh.growth, mesh.far * h);
        let ys = graded_axis(layout.omega.y0, layout.omega.y1, &fy, h_min, mesh.growth, mesh.far * h);
        let zs: Vec<f64> = (0..=mesh.layers).map(|k| -h / 2.0 + h * k as f64 / mesh.layers as f64).collect();
        let grid = HexGrid::new(xs, ys, zs)?;
        let [nx, ny, _] = grid.dims();
        let rho = layout.radius * h;
        let mut fixed = vec![false; 3 * grid.n_nodes()];
        let mut per_support = vec![0usize; layout.centers.len()];
        for node in 0..grid.n_nodes() {
            let [ix, iy, iz] = grid.node_indices(node);
            let [x, y, _] = grid.coords(node);
            let lateral = layout.clamp == ClampMode::LateralAndSupports && (ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1);
            let mut support = false;
            if iz == 0 {
                for (j, c) in layout.centers.iter().enumerate() {
                    if (x - c[0]).hypot(y - c[1]) <= rho * (1.0 + 1e-12) {
                        support = true;
                        per_support[j] += 1;
                    }
                }
            }
            if lateral || support {
                fixed[3 * node..3 * node + 3].iter_mut().for_each(|f| *f = true);
            }
        }
        if let Some(j) = per_support.iter().position(|&n| n < 5) {
            return Err(Error::InvalidInput(format!("support {j} covers only {} nodes; refine the mesh", per_support[j])));
        }
        let map = DofMap::new(fixed.len(), |i| fixed[i]);
        let energy = assemble_elastic(&grid, a.matrix()).restrict(&map.free_index, map.n_free);
        let norm = assemble_form(&grid, norm_terms(variant, layout, h)).restrict(&map.free_index, map.n_free);
        Ok(Self { grid, map, energy, norm })
    }
}

/// Estimates the Korn constant for one thickness.
pub fn korn_constant(
    layout: &SupportLayout,
    a: &StiffnessMatrix<f64>,
    variant: NormVariant,
    h: f64,
    mesh: &KornMesh,
) -> Result<KornEstimate> {
    let p = KornProblem::build(layout, a, variant, h, mesh)?;
    let opts = EigenOptions { block: 16, max_iter: 600, rel_tol: 1e-10, seed: 11 };
    let pair = smallest_eigenpair(&p.energy, &p.norm, opts)?;
    Ok(KornEstimate {
        h,
        supports: layout.centers.len(),
        clamp: layout.clamp,
        norm: variant,
        k: pair.value.powf(-0.5),
        mesh_cells: p.grid.n_elements(),
        dofs: p.map.n_free,
        eig_residual: pair.residual,
        iterations: pair.iterations,
    })
}

/// Least-squares line `y ≈ a + b x` with its coefficient of determination.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    LinearFit { intercept, slope, r2 }
}

/// Fit of `K(h) ≈ a + b(1 + |ln h|)`.
pub fn log_fit(estimates: &[KornEstimate]) -> LinearFit {
    let xs: Vec<f64> = estimates.iter().map(|e| 1.0 + e.h.ln().abs()).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.k).collect();
    linear_fit(&xs, &ys)
}

/// Largest relative spread `(max − min) / min` of the estimates.
pub fn relative_variation(estimates: &[KornEstimate]) -> f64 {
    let max = estimates.iter().map(|e| e.k).fold(f64::NEG_INFINITY, f64::max);
    let min = estimates.iter().map(|e| e.k).fold(f64::INFINITY, f64::min);
    (max - min) / min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_korn_estimate_is_positive() {
        let layout = SupportLayout::single_centered(ClampMode::LateralAndSupports);
        let a = StiffnessMatrix::isotropic(0.0, 0.5).unwrap();
        let mesh = KornMesh { far: 4.0, ..Default::default() };
        let e = korn_constant(&layout, &a, NormVariant::Plain, 0.2, &mesh).unwrap();
        assert!(e.k > 0.0 && e.k.is_finite());
        // Inverse iteration stops on the eigenvalue, so the vector residual
        // is only of the order of the square root of that tolerance.
        assert!(e.eig_residual < 1e-4, "{} (K {}, iterations {})", e.eig_residual, e.k, e.iterations);
    }
}
