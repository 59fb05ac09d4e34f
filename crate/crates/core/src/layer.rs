//! The boundary-layer problem in `Λ(T) = (−T, T)² × (−½, ½)` clamped on a
//! small set `θ` of the bottom face, and extraction of the 4x4 elastic
//! logarithmic capacity matrix `C♯` from the far field of the layer
//! potential.
//!
//! The potential column `P_j` is computed directly: it solves the
//! homogeneous layer problem with zero data on `θ`, natural conditions on
//! the faces and Dirichlet data `Ξ_j + d♯c_j` on the lateral boundary, where
//! `Ξ = Σ_{p≤3} W^p(ζ, ∇η) Φ♯(η)` is the far-field ansatz. The vector `c_j`
//! is determined self-consistently: it has to equal the least-squares fit
//! of `P_j − Ξ_j` against the columns of `d♯` on a matching annulus.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::elastic::{MaterialSpec, StiffnessMatrix};
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_body_load, assemble_elastic_with, assemble_face_load, ElementKind};
use crate::fem::constrained::DofMap;
use crate::fem::grid::{symmetric_graded_axis, HexGrid};
use crate::fem::skyline::SkylineCholesky;
use crate::fem::sparse::CsrMatrix;
use crate::fundsol::Fundamentals;
use crate::inequality::korn::linear_fit;
use crate::inequality::weights::cutoff;
use crate::poly::ZETA;
use crate::reduction::AnsatzOperators;

/// Shape of the clamped area on the bottom face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum ThetaShape {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Square { half: f64 },
}

impl Default for ThetaShape {
    fn default() -> Self {
        ThetaShape::Disk { radius: 1.0 }
    }
}

impl ThetaShape {
    pub fn contains(&self, eta: [f64; 2]) -> bool {
        let tol = 1e-12;
        match *self {
            ThetaShape::Disk { radius } => eta[0].hypot(eta[1]) <= radius + tol,
            ThetaShape::Ellipse { a, b } => (eta[0] / a).powi(2) + (eta[1] / b).powi(2) <= 1.0 + tol,
            ThetaShape::Square { half } => eta[0].abs().max(eta[1].abs()) <= half + tol,
        }
    }

    /// Smallest `R` with `θ ⊂ B_R`.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            ThetaShape::Disk { radius } => radius,
            ThetaShape::Ellipse { a, b } => a.max(b),
            ThetaShape::Square { half } => half * std::f64::consts::SQRT_2,
        }
    }

    /// Smallest half-width of the shape.
    fn inner_size(&self) -> f64 {
        match *self {
            ThetaShape::Disk { radius } => radius,
            ThetaShape::Ellipse { a, b } => a.min(b),
            ThetaShape::Square { half } => half,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ThetaShape::Disk { radius } => radius > 0.0,
            ThetaShape::Ellipse { a, b } => a > 0.0 && b > 0.0,
            ThetaShape::Square { half } => half > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("clamp shape {self} must have positive size")))
        }
    }
}

impl fmt::Display for ThetaShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThetaShape::Disk { radius } => write!(f, "disk:{radius}"),
            ThetaShape::Ellipse { a, b } => write!(f, "ellipse:{a},{b}"),
            ThetaShape::Square { half } => write!(f, "square:{half}"),
        }
    }
}

impl FromStr for ThetaShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {t} in {s}: {e}"))))
                .collect::<Result<_>>()?
        };
        let shape = match (kind.trim(), nums.as_slice()) {
            ("disk", []) => ThetaShape::Disk { radius: 1.0 },
            ("disk", [r]) => ThetaShape::Disk { radius: *r },
            ("ellipse", [a, b]) => ThetaShape::Ellipse { a: *a, b: *b },
            ("square", [h]) => ThetaShape::Square { half: *h },
            _ => return Err(Error::Config(format!("unknown clamp shape {s}; use disk[:R], ellipse:A,B or square:H"))),
        };
        shape.validate()?;
        Ok(shape)
    }
}

/// Mesh parameters for the truncated layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMeshSpec {
    /// Half-width `T` of the box.
    pub t: f64,
    /// Number of element layers through the thickness.
    pub nz: usize,
    /// In-plane spacing over the clamped area.
    pub h_core: f64,
    /// Growth factor of the in-plane spacing away from the core.
    pub growth: f64,
    /// Largest in-plane spacing.
    pub h_far: f64,
}

impl Default for LayerMeshSpec {
    fn default() -> Self {
        Self { t: 8.0, nz: 6, h_core: 0.25, growth: 1.25, h_far: 1.0 }
    }
}

impl LayerMeshSpec {
    pub fn with_size(t: f64, nz: usize) -> Self {
        Self { t, nz, ..Self::default() }
    }

    /// One refinement level: all spacings scaled by `factor` and the
    /// layer count increased to match.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            nz: ((self.nz as f64) / factor).round() as usize,
            h_core: self.h_core * factor,
            h_far: self.h_far * factor,
            growth: 1.0 + (self.growth - 1.0) * factor,
            ..*self
        }
    }
}

#[derive(Clone, Debug)]
pub struct LayerMesh {
    pub spec: LayerMeshSpec,
    pub theta: ThetaShape,
    pub grid: HexGrid,
    /// Bottom-face nodes inside `θ`.
    pub clamped: Vec<usize>,
    /// Nodes on the lateral boundary of the box.
    pub lateral: Vec<usize>,
}

impl LayerMesh {
    pub fn build(spec: LayerMeshSpec, theta: ThetaShape) -> Result<Self> {
        theta.validate()?;
        if !(spec.t > 0.0 && spec.h_core > 0.0 && spec.h_far >= spec.h_core && spec.growth >= 1.0) || spec.nz == 0 {
            return Err(Error::Config(format!("invalid layer mesh parameters {spec:?}")));
        }
        let r = theta.bounding_radius();
        if r >= spec.t / 4.0 {
            return Err(Error::Config(format!("clamp radius {r} must be below T/4 = {}", spec.t / 4.0)));
        }
        if theta.inner_size() < 2.0 * spec.h_core {
            return Err(Error::Config(format!(
                "clamped area needs at least 2 element rings: size {} with spacing {}",
                theta.inner_size(),
                spec.h_core
            )));
        }
        let axis = symmetric_graded_axis(spec.t, 1.25 * r, spec.h_core, spec.growth, spec.h_far);
        let zs: Vec<f64> = (0..=spec.nz).map(|k| -0.5 + k as f64 / spec.nz as f64).collect();
        let grid = HexGrid::new(axis.clone(), axis, zs)?;
        let [nx, ny, _] = grid.dims();
        let mut clamped = Vec::new();
        let mut lateral = Vec::new();
        for n in 0..grid.n_nodes() {
            let [ix, iy, iz] = grid.node_indices(n);
            let c = grid.coords(n);
            if iz == 0 && theta.contains([c[0], c[1]]) {
                clamped.push(n);
            }
            if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                lateral.push(n);
            }
        }
        if clamped.is_empty() {
            return Err(Error::Config(format!("clamp shape {theta} contains no mesh node")));
        }
        Ok(Self { spec, theta, grid, clamped, lateral })
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.grid.n_nodes()
    }

    /// `Nx×Ny×Nz` node counts and spacing parameters.
    pub fn signature(&self) -> String {
        let [nx, ny, nz] = self.grid.dims();
        format!(
            "{nx}x{ny}x{nz} nodes, h_core={}, growth={}, h_far={}",
            self.spec.h_core, self.spec.growth, self.spec.h_far
        )
    }
}

/// `d♯(η, ζ)`: in-plane translations and the two rotations about
/// horizontal axes.
pub fn rigid_sharp(eta: [f64; 2], zeta: f64) -> [[f64; 4]; 3] {
    [[1.0, 0.0, 0.0, zeta], [0.0, 1.0, -zeta, 0.0], [0.0, 0.0, eta[1], -eta[0]]]
}

/// Factorised stiffness of the layer with `θ` and the lateral boundary
/// fixed. Shared read-only by all right-hand sides.
pub struct LayerSystem {
    k: CsrMatrix,
    map: DofMap,
    factor: SkylineCholesky,
}

impl LayerSystem {
    /// Incompatible-modes elements, which do not lock in bending when the
    /// in-plane spacing is much larger than the layer thickness.
    pub fn new(mesh: &LayerMesh, a: &Mat<f64>) -> Result<Self> {
        Self::with_element(mesh, a, ElementKind::IncompatibleModes)
    }

    pub fn with_element(mesh: &LayerMesh, a: &Mat<f64>, kind: ElementKind) -> Result<Self> {
        let n = mesh.n_dofs();
        let mut fixed = vec![false; n];
        for &node in mesh.clamped.iter().chain(&mesh.lateral) {
            for c in 0..3 {
                fixed[3 * node + c] = true;
            }
        }
        let k = assemble_elastic_with(&mesh.grid, a, kind);
        let map = DofMap::new(n, |d| fixed[d]);
        let kff = k.restrict(&map.free_index, map.n_free);
        debug!("layer system: {} free dofs, bandwidth {}", map.n_free, kff.bandwidth());
        let factor = SkylineCholesky::factor(&kff)?;
        Ok(Self { k, map, factor })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.k
    }

    /// Solves with nodal load `f` and values of `prescribed` on the fixed
    /// dofs. Returns the full solution and the relative residual on the
    /// free dofs.
    pub fn solve(&self, f: &[f64], prescribed: &[f64]) -> (Vec<f64>, f64) {
        let mut lifted = prescribed.to_vec();
        for (i, idx) in self.map.free_index.iter().enumerate() {
            if idx.is_some() {
                lifted[i] = 0.0;
            }
        }
        let kl = self.k.apply(&lifted);
        let mut rhs = vec![0.0; self.map.n_free];
        for (i, idx) in self.map.free_index.iter().enumerate() {
            if let Some(kk) = idx {
                rhs[*kk] = f[i] - kl[i];
            }
        }
        let x = self.factor.solve(&rhs);
        let mut u = lifted;
        self.map.scatter(&x, &mut u);
        let ku = self.k.apply(&u);
        let mut res = 0.0;
        let mut scale = 0.0;
        for (i, idx) in self.map.free_index.iter().enumerate() {
            if idx.is_some() {
                res += (ku[i] - f[i]).powi(2);
                scale += kl[i].powi(2) + f[i].powi(2);
            }
        }
        let rel = if scale > 0.0 { (res / scale).sqrt() } else { res.sqrt() };
        (u, rel)
    }
}

#[derive(Clone, Debug)]
pub struct LayerSolution {
    /// Nodal displacements, `3·node + component`.
    pub u: Vec<f64>,
    pub residual: f64,
}

pub type VectorField<'a> = &'a (dyn Fn([f64; 3]) -> [f64; 3] + Sync);

/// Solves `D(−∇)ᵀAD(∇)v = F` in the box with `D(±e₃)ᵀAD(∇)v = G±` on the
/// faces `ζ = ±½` outside `θ`, `v = 0` on `θ` and `v = outer` (default 0)
/// on the lateral boundary.
pub fn solve_layer_problem(
    mesh: &LayerMesh,
    a: &StiffnessMatrix<f64>,
    f: VectorField,
    g_plus: VectorField,
    g_minus: VectorField,
    outer: Option<VectorField>,
) -> Result<LayerSolution> {
    solve_layer_problem_with(mesh, a, ElementKind::IncompatibleModes, f, g_plus, g_minus, outer)
}

pub fn solve_layer_problem_with(
    mesh: &LayerMesh,
    a: &StiffnessMatrix<f64>,
    kind: ElementKind,
    f: VectorField,
    g_plus: VectorField,
    g_minus: VectorField,
    outer: Option<VectorField>,
) -> Result<LayerSolution> {
    let system = LayerSystem::with_element(mesh, a.matrix(), kind)?;
    let mut load = assemble_body_load(&mesh.grid, f);
    for (l, v) in load.iter_mut().zip(assemble_face_load(&mesh.grid, true, g_plus)) {
        *l += v;
    }
    for (l, v) in load.iter_mut().zip(assemble_face_load(&mesh.grid, false, g_minus)) {
        *l += v;
    }
    let mut prescribed = vec![0.0; mesh.n_dofs()];
    if let Some(outer) = outer {
        for &node in &mesh.lateral {
            let v = outer(mesh.grid.coords(node));
            prescribed[3 * node..3 * node + 3].copy_from_slice(&v);
        }
    }
    for &node in &mesh.clamped {
        prescribed[3 * node..3 * node + 3].fill(0.0);
    }
    let (u, residual) = system.solve(&load, &prescribed);
    Ok(LayerSolution { u, residual })
}

/// One term `coeff · ζ^k ∂₁^a ∂₂^b` acting from input `col` to output `row`.
#[derive(Clone, Copy, Debug)]
struct AnsatzTerm {
    row: usize,
    col: usize,
    a: usize,
    b: usize,
    k: usize,
    coeff: f64,
}

/// The far-field ansatz `Ξ(η, ζ) = Σ_{p≤3} W^p(ζ, ∇η) Φ♯(η)`.
///
/// `Φ♯ = Φ d♯(−∇, 0)`: its first two columns are `(Φ′, 0)`, the third is
/// `(0, 0, −∂₂Φ₃)` and the fourth `(0, 0, ∂₁Φ₃)`.
pub struct FarField<'a> {
    fund: &'a Fundamentals,
    terms: Vec<AnsatzTerm>,
    max_k: usize,
}

impl<'a> FarField<'a> {
    pub fn new(fund: &'a Fundamentals, ops: &AnsatzOperators<f64>) -> Result<Self> {
        let mut terms = Vec::new();
        for p in 0..4 {
            let op = ops.operator(p);
            for (col, column) in op.iter().enumerate() {
                for (row, symbol) in column.iter().enumerate() {
                    for (e, c) in symbol.terms() {
                        if *c != 0.0 {
                            terms.push(AnsatzTerm {
                                row,
                                col,
                                a: e[0] as usize,
                                b: e[1] as usize,
                                k: e[ZETA] as usize,
                                coeff: *c,
                            });
                        }
                    }
                }
            }
        }
        for t in &terms {
            let ok = if t.col < 2 { t.a + t.b <= fund.membrane_order() } else { t.a + t.b < fund.bending_order() };
            if !ok {
                return Err(Error::Construction(format!(
                    "ansatz needs derivative order {} beyond the fundamental solution tables",
                    t.a + t.b
                )));
            }
        }
        let max_k = terms.iter().map(|t| t.k).max().unwrap_or(0);
        Ok(Self { fund, terms, max_k })
    }

    /// `∂₁^a ∂₂^b Φ♯_{col,j}(η)`.
    fn phi_sharp_derivative(&self, col: usize, j: usize, a: usize, b: usize, eta: [f64; 2]) -> f64 {
        match (col, j) {
            (0..=1, 0..=1) => self.fund.phi_prime_derivative(col, j, a, b, eta),
            (2, 2) => -self.fund.phi3_derivative(a, b + 1, eta),
            (2, 3) => self.fund.phi3_derivative(a + 1, b, eta),
            _ => 0.0,
        }
    }

    /// Coefficients of `Ξ(η, ·)` as a polynomial in `ζ`: entry `k` holds
    /// the 3x4 matrix multiplying `ζ^k`.
    pub fn zeta_polynomial(&self, eta: [f64; 2]) -> Vec<[[f64; 4]; 3]> {
        let mut out = vec![[[0.0; 4]; 3]; self.max_k + 1];
        for t in &self.terms {
            for j in 0..4 {
                let v = self.phi_sharp_derivative(t.col, j, t.a, t.b, eta);
                if v != 0.0 {
                    out[t.k][t.row][j] += t.coeff * v;
                }
            }
        }
        out
    }

    pub fn eval(&self, eta: [f64; 2], zeta: f64) -> [[f64; 4]; 3] {
        eval_zeta(&self.zeta_polynomial(eta), zeta)
    }
}

fn eval_zeta(poly: &[[[f64; 4]; 3]], zeta: f64) -> [[f64; 4]; 3] {
    let mut out = [[0.0; 4]; 3];
    for m in poly.iter().rev() {
        for r in 0..3 {
            for j in 0..4 {
                out[r][j] = out[r][j] * zeta + m[r][j];
            }
        }
    }
    out
}

/// Settings for [`extract_capacity`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CapacityOptions {
    /// Matching annulus as fractions of `T`.
    pub annulus: [f64; 2],
    /// Stop when `‖c^{k+1} − c^k‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// The cut-off `χ(ρ / (cutoff·R_θ))` used to split off the remainder.
    pub cutoff: f64,
    /// Relative fit residual above which the result is flagged.
    pub residual_warning: f64,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { annulus: [0.55, 0.8], tol: 1e-6, max_iter: 8, cutoff: 2.0, residual_warning: 0.1 }
    }
}

/// Weighted least-squares fit of nodal fields against the columns of `d♯`
/// over an annulus, with nodal volumes as weights.
pub struct AnnulusFit {
    nodes: Vec<(usize, [[f64; 4]; 3], f64)>,
    gram_inv: Mat<f64>,
    /// `‖G⁻¹‖^{1/2}` for the rigid Gram matrix `G` of the annulus.
    coefficient_gain: f64,
    pub inner: f64,
    pub outer: f64,
}

impl AnnulusFit {
    pub fn new(mesh: &LayerMesh, inner: f64, outer: f64) -> Result<Self> {
        let vol = mesh.grid.nodal_volumes();
        let mut nodes = Vec::new();
        let mut gram = Mat::zeros(4, 4);
        for (n, w) in vol.iter().enumerate() {
            let c = mesh.grid.coords(n);
            let rho = c[0].hypot(c[1]);
            if rho >= inner && rho <= outer {
                let d = rigid_sharp([c[0], c[1]], c[2]);
                for p in 0..4 {
                    for q in 0..4 {
                        gram[(p, q)] += w * (0..3).map(|r| d[r][p] * d[r][q]).sum::<f64>();
                    }
                }
                nodes.push((n, d, *w));
            }
        }
        let gram_inv = gram
            .inverse()
            .ok_or_else(|| Error::Solver(format!("annulus [{inner}, {outer}] has a singular rigid Gram matrix")))?;
        let sym = nalgebra::DMatrix::from_fn(4, 4, |i, j| gram_inv[(i, j)]);
        let coefficient_gain = sym.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max).sqrt();
        Ok(Self { nodes, gram_inv, coefficient_gain, inner, outer })
    }

    /// Least-squares fit of `field(node) ≈ d♯c` over the annulus.
    pub fn fit(&self, field: impl Fn(usize) -> [f64; 3]) -> RigidFit {
        let mut rhs = [0.0; 4];
        let values: Vec<[f64; 3]> = self.nodes.iter().map(|(n, _, _)| field(*n)).collect();
        for ((_, d, w), v) in self.nodes.iter().zip(&values) {
            for p in 0..4 {
                rhs[p] += w * (0..3).map(|r| d[r][p] * v[r]).sum::<f64>();
            }
        }
        let c: [f64; 4] = std::array::from_fn(|p| (0..4).map(|q| self.gram_inv[(p, q)] * rhs[q]).sum());
        let mut res = 0.0;
        let mut tot = 0.0;
        for ((_, d, w), v) in self.nodes.iter().zip(&values) {
            for r in 0..3 {
                let fit: f64 = (0..4).map(|p| d[r][p] * c[p]).sum();
                res += w * (v[r] - fit).powi(2);
                tot += w * v[r] * v[r];
            }
        }
        let residual = if tot > 0.0 { (res / tot).sqrt() } else { 0.0 };
        RigidFit { c, residual, error_bar: res.sqrt() * self.coefficient_gain }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RigidFit {
    pub c: [f64; 4],
    /// Weighted residual relative to the weighted norm of the field.
    pub residual: f64,
    /// Largest change of `c` that the residual could cause if it were
    /// entirely rigid: `‖r‖_w ‖G⁻¹‖^{1/2}`.
    pub error_bar: f64,
}

/// The capacity matrix with its quality metadata.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CapacityMatrix {
    /// `c[i][j]`: entry `i` of column `j`.
    pub c: [[f64; 4]; 4],
    pub symmetry_defect: f64,
    /// Relative fit residual per column on the matching annulus.
    pub fit_residuals: [f64; 4],
    /// Per-column bound on the coefficient error implied by the fit residual.
    pub fit_error_bars: [f64; 4],
    pub t: f64,
    pub mesh: String,
    /// Fixed-point iterations per column.
    pub iterations: [usize; 4],
    /// Largest singular value of the linearised fit map; plain substitution
    /// would contract by this factor per step.
    pub picard_factor: f64,
    pub warning: bool,
}

impl CapacityMatrix {
    pub fn symmetrized(&self) -> [[f64; 4]; 4] {
        std::array::from_fn(|i| std::array::from_fn(|j| 0.5 * (self.c[i][j] + self.c[j][i])))
    }

    pub fn row_major(&self) -> Vec<f64> {
        self.c.iter().flatten().copied().collect()
    }
}

/// `‖C − Cᵀ‖_F / ‖C‖_F`.
pub fn symmetry_defect(c: &[[f64; 4]; 4]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            num += (c[i][j] - c[j][i]).powi(2);
            den += c[i][j].powi(2);
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// The four potential columns and the far field they were matched to.
#[derive(Clone, Debug)]
pub struct PotentialSolution {
    pub columns: [Vec<f64>; 4],
    /// `Ξ` at every node (`3·node + row`), zero inside `ρ < R_θ`.
    pub far_field: [Vec<f64>; 4],
    /// `c^k` per column and iteration.
    pub history: [Vec<[f64; 4]>; 4],
    pub solver_residual: f64,
}

/// Runs the matching procedure for all four columns.
pub fn extract_capacity(
    mesh: &LayerMesh,
    material: &StiffnessMatrix<f64>,
    fund: &Fundamentals,
    ops: &AnsatzOperators<f64>,
    opts: &CapacityOptions,
) -> Result<(CapacityMatrix, PotentialSolution)> {
    let t = mesh.spec.t;
    let r_theta = mesh.theta.bounding_radius();
    if t < 8.0 * r_theta {
        return Err(Error::Config(format!("truncation T = {t} must be at least 8 R_θ = {}", 8.0 * r_theta)));
    }
    let [lo, hi] = opts.annulus;
    if !(0.0 < lo && lo < hi && hi <= 1.0) || lo * t <= 2.0 * r_theta {
        return Err(Error::Config(format!("annulus [{lo}, {hi}]·T must lie in (2R_θ, T]")));
    }
    let system = LayerSystem::new(mesh, material.matrix())?;
    let far = FarField::new(fund, ops)?;
    let grid = &mesh.grid;
    let n = mesh.n_dofs();

    // Ξ at every node outside B_{R_θ}, evaluated once per vertical line.
    let [nx, ny, nzn] = grid.dims();
    let lines: Vec<(usize, usize)> = (0..ny).flat_map(|iy| (0..nx).map(move |ix| (ix, iy))).collect();
    let line_values: Vec<Vec<[[f64; 4]; 3]>> = lines
        .par_iter()
        .map(|&(ix, iy)| {
            let eta = [grid.xs[ix], grid.ys[iy]];
            if eta[0].hypot(eta[1]) < r_theta {
                return vec![[[0.0; 4]; 3]; nzn];
            }
            let poly = far.zeta_polynomial(eta);
            grid.zs.iter().map(|&z| eval_zeta(&poly, z)).collect()
        })
        .collect();
    let mut xi: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
    for (&(ix, iy), vals) in lines.iter().zip(&line_values) {
        for (iz, v) in vals.iter().enumerate() {
            let node = grid.node(ix, iy, iz);
            for j in 0..4 {
                for r in 0..3 {
                    xi[j][3 * node + r] = v[r][j];
                }
            }
        }
    }

    let zero_load = vec![0.0; n];
    let lateral_data = |field: &dyn Fn(usize) -> [f64; 3]| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for &node in &mesh.lateral {
            p[3 * node..3 * node + 3].copy_from_slice(&field(node));
        }
        p
    };
    let rigid_at = |node: usize, c: &[f64; 4]| -> [f64; 3] {
        let x = grid.coords(node);
        let d = rigid_sharp([x[0], x[1]], x[2]);
        std::array::from_fn(|r| (0..4).map(|m| d[r][m] * c[m]).sum())
    };
    let fit = AnnulusFit::new(mesh, lo * t, hi * t)?;

    // Linearisation of the fit map: the response to unit rigid data.
    let unit: Vec<[f64; 4]> = (0..4).map(|m| std::array::from_fn(|q| if q == m { 1.0 } else { 0.0 })).collect();
    let responses: Vec<(Vec<f64>, f64)> = unit
        .par_iter()
        .map(|e| system.solve(&zero_load, &lateral_data(&|node| rigid_at(node, e))))
        .collect();
    let mut jac = Mat::zeros(4, 4);
    for (m, (u, _)) in responses.iter().enumerate() {
        let g = fit.fit(|node| [u[3 * node], u[3 * node + 1], u[3 * node + 2]]).c;
        for p in 0..4 {
            jac[(p, m)] = g[p];
        }
    }
    let picard_factor = largest_singular_value(&jac);
    let mut newton = Mat::<f64>::identity(4);
    for p in 0..4 {
        for q in 0..4 {
            newton[(p, q)] -= jac[(p, q)];
        }
    }
    let newton_inv = newton
        .inverse()
        .ok_or_else(|| Error::Solver("fit map has a unit eigenvalue; the matching problem is degenerate".into()))?;

    struct ColumnResult {
        c: [f64; 4],
        u: Vec<f64>,
        history: Vec<[f64; 4]>,
        residual: f64,
        fit_residual: f64,
        error_bar: f64,
        solver_residual: f64,
    }
    let run_column = |j: usize| -> Result<ColumnResult> {
        let mut c = [0.0; 4];
        let mut history = vec![c];
        let mut solver_residual: f64 = 0.0;
        for k in 1..=opts.max_iter {
            let data = lateral_data(&|node| {
                let r = rigid_at(node, &c);
                std::array::from_fn(|q| xi[j][3 * node + q] + r[q])
            });
            let (u, res) = system.solve(&zero_load, &data);
            solver_residual = solver_residual.max(res);
            let RigidFit { c: g, residual: fit_res, error_bar } =
                fit.fit(|node| std::array::from_fn(|q| u[3 * node + q] - xi[j][3 * node + q]));
            // Newton step on the affine map c ↦ g(c).
            let delta: [f64; 4] = std::array::from_fn(|p| (0..4).map(|q| newton_inv[(p, q)] * (g[q] - c[q])).sum());
            let step = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
            for p in 0..4 {
                c[p] += delta[p];
            }
            history.push(c);
            debug!("column {j} iteration {k}: step {step:.3e}, fit residual {fit_res:.3e}");
            if step <= opts.tol {
                return Ok(ColumnResult {
                    c,
                    u,
                    history,
                    residual: step,
                    fit_residual: fit_res,
                    error_bar,
                    solver_residual,
                });
            }
        }
        Err(Error::Solver(format!(
            "capacity fixed point for column {j} did not converge in {} iterations; trace {history:?}",
            opts.max_iter
        )))
    };
    let results: Vec<ColumnResult> = (0..4).into_par_iter().map(run_column).collect::<Result<_>>()?;

    let mut cmat = [[0.0; 4]; 4];
    for (j, r) in results.iter().enumerate() {
        for i in 0..4 {
            cmat[i][j] = r.c[i];
        }
        debug!("column {j}: final step {:.2e}", r.residual);
    }
    let fit_residuals: [f64; 4] = std::array::from_fn(|j| results[j].fit_residual);
    let warning = fit_residuals.iter().any(|r| *r > opts.residual_warning);
    if warning {
        warn!("capacity fit residuals {fit_residuals:?} exceed {}", opts.residual_warning);
    }
    let cap = CapacityMatrix {
        c: cmat,
        symmetry_defect: symmetry_defect(&cmat),
        fit_residuals,
        fit_error_bars: std::array::from_fn(|j| results[j].error_bar),
        t,
        mesh: mesh.signature(),
        iterations: std::array::from_fn(|j| results[j].history.len() - 1),
        picard_factor,
        warning,
    };
    info!("capacity: symmetry defect {:.3e}, iterations {:?}", cap.symmetry_defect, cap.iterations);
    let solver_residual = results.iter().map(|r| r.solver_residual).fold(0.0, f64::max);
    let mut results = results.into_iter();
    let mut next = || results.next().expect("four columns");
    let (r0, r1, r2, r3) = (next(), next(), next(), next());
    let pot = PotentialSolution {
        history: [r0.history, r1.history, r2.history, r3.history],
        columns: [r0.u, r1.u, r2.u, r3.u],
        far_field: xi,
        solver_residual,
    };
    Ok((cap, pot))
}

fn largest_singular_value(m: &Mat<f64>) -> f64 {
    let d = nalgebra::DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)]);
    d.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Capacity fitted on a different annulus, for invariance checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnnulusCheck {
    pub inner: f64,
    pub outer: f64,
    pub c: [[f64; 4]; 4],
    pub fit_residuals: [f64; 4],
    /// `‖C_annulus − C♯‖_F / ‖C♯‖_F`.
    pub drift: f64,
}

/// Root-mean-square size of the remainder rows on one ring.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DecaySample {
    pub rho: f64,
    pub rows: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymmetryDecayReport {
    pub symmetry_defect: f64,
    pub raw: [[f64; 4]; 4],
    pub symmetrized: [[f64; 4]; 4],
    pub annuli: Vec<AnnulusCheck>,
    /// Log-log slopes of the remainder rows over `ρ ∈ [2R_θ, T/2]`.
    pub growth_exponents: [f64; 3],
    pub samples: Vec<DecaySample>,
}

/// Re-fits `C♯` on shifted annuli and measures the growth of the remainder
/// `P − (1 − χ)Ξ − d♯C♯`.
pub fn symmetry_and_decay_report(
    mesh: &LayerMesh,
    cap: &CapacityMatrix,
    pot: &PotentialSolution,
    opts: &CapacityOptions,
) -> Result<SymmetryDecayReport> {
    let t = mesh.spec.t;
    let grid = &mesh.grid;
    let mut annuli = Vec::new();
    let base = [opts.annulus[0], opts.annulus[1]];
    for shift in [-0.05, 0.0, 0.05] {
        let (lo, hi) = (base[0] + shift, (base[1] + shift).min(1.0));
        let fit = AnnulusFit::new(mesh, lo * t, hi * t)?;
        let mut c = [[0.0; 4]; 4];
        let mut res = [0.0; 4];
        for j in 0..4 {
            let RigidFit { c: cj, residual: r, .. } = fit.fit(|node| std::array::from_fn(|q| pot.columns[j][3 * node + q] - pot.far_field[j][3 * node + q]));
            for i in 0..4 {
                c[i][j] = cj[i];
            }
            res[j] = r;
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                num += (c[i][j] - cap.c[i][j]).powi(2);
                den += cap.c[i][j].powi(2);
            }
        }
        annuli.push(AnnulusCheck { inner: lo, outer: hi, c, fit_residuals: res, drift: (num / den.max(f64::MIN_POSITIVE)).sqrt() });
    }

    let r_theta = mesh.theta.bounding_radius();
    let (rho_min, rho_max) = (2.0 * r_theta, 0.5 * t);
    let bins = 10;
    let edge = |k: usize| rho_min * (rho_max / rho_min).powf(k as f64 / bins as f64);
    let mut acc = vec![([0.0; 3], 0.0, 0.0); bins];
    let vol = grid.nodal_volumes();
    for (node, w) in vol.iter().enumerate() {
        let x = grid.coords(node);
        let rho = x[0].hypot(x[1]);
        if rho < rho_min || rho > rho_max {
            continue;
        }
        let k = (((rho / rho_min).ln() / (rho_max / rho_min).ln()) * bins as f64).floor().min(bins as f64 - 1.0) as usize;
        let chi = 1.0 - cutoff(rho / (opts.cutoff * r_theta));
        let d = rigid_sharp([x[0], x[1]], x[2]);
        for j in 0..4 {
            for r in 0..3 {
                let rigid: f64 = (0..4).map(|m| d[r][m] * cap.c[m][j]).sum();
                let rem = pot.columns[j][3 * node + r] - chi * pot.far_field[j][3 * node + r] - rigid;
                acc[k].0[r] += w * rem * rem;
            }
        }
        acc[k].1 += w;
        acc[k].2 += w * rho;
    }
    let samples: Vec<DecaySample> = acc
        .iter()
        .enumerate()
        .filter(|(_, a)| a.1 > 0.0)
        .map(|(k, a)| DecaySample {
            rho: if a.1 > 0.0 { a.2 / a.1 } else { 0.5 * (edge(k) + edge(k + 1)) },
            rows: std::array::from_fn(|r| (a.0[r] / a.1).sqrt()),
        })
        .collect();
    let growth_exponents = std::array::from_fn(|r| {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            samples.iter().filter(|s| s.rows[r] > 0.0).map(|s| (s.rho.ln(), s.rows[r].ln())).unzip();
        if xs.len() < 2 {
            f64::NAN
        } else {
            linear_fit(&xs, &ys).slope
        }
    });
    Ok(SymmetryDecayReport {
        symmetry_defect: cap.symmetry_defect,
        raw: cap.c,
        symmetrized: cap.symmetrized(),
        annuli,
        growth_exponents,
        samples,
    })
}

impl SymmetryDecayReport {
    /// Writes `rho,row1,row2,row3`.
    pub fn write_decay_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rho", "row1", "row2", "row3"])?;
        for s in &self.samples {
            w.serialize((s.rho, s.rows[0], s.rows[1], s.rows[2]))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// The JSON record written by the capacity run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub struct CapacityRecord {
    #[serde(rename = "T")]
    pub t: f64,
    pub mesh: String,
    pub material: MaterialSpec,
    pub theta_spec: String,
    #[serde(rename = "C_sharp")]
    pub c_sharp: Vec<f64>,
    pub symmetry_defect: f64,
    pub fit_residuals: [f64; 4],
    pub fit_error_bars: [f64; 4],
    pub iterations: [usize; 4],
}

impl CapacityRecord {
    pub fn new(cap: &CapacityMatrix, material: MaterialSpec, theta: &ThetaShape) -> Self {
        Self {
            t: cap.t,
            mesh: cap.mesh.clone(),
            material,
            theta_spec: theta.to_string(),
            c_sharp: cap.row_major(),
            symmetry_defect: cap.symmetry_defect,
            fit_residuals: cap.fit_residuals,
            fit_error_bars: cap.fit_error_bars,
            iterations: cap.iterations,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_mesh() -> LayerMesh {
        LayerMesh::build(LayerMeshSpec { t: 4.0, nz: 2, h_core: 0.25, growth: 1.4, h_far: 1.0 }, ThetaShape::Disk { radius: 0.5 }).unwrap()
    }

    #[test]
    fn theta_parsing_round_trip() {
        for s in ["disk:1", "ellipse:1.5,0.75", "square:0.7"] {
            let t: ThetaShape = s.parse().unwrap();
            assert_eq!(t.to_string(), s);
        }
        assert!("disk:-1".parse::<ThetaShape>().is_err());
        assert!("blob".parse::<ThetaShape>().is_err());
    }

    #[test]
    fn mesh_invariants() {
        let m = small_mesh();
        assert!(!m.clamped.is_empty());
        for &n in &m.clamped {
            let c = m.grid.coords(n);
            assert_eq!(c[2], -0.5);
            assert!(c[0].hypot(c[1]) <= 0.5 + 1e-12);
        }
        let too_big = LayerMesh::build(LayerMeshSpec::with_size(4.0, 2), ThetaShape::Disk { radius: 1.0 });
        assert!(too_big.is_err());
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = small_mesh();
        let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
        let z = |_: [f64; 3]| [0.0; 3];
        let s = solve_layer_problem(&m, &a, &z, &z, &z, None).unwrap();
        assert!(s.u.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rigid_data_is_reproduced_and_fitted() {
        // With θ clamped to the same rigid motion as the lateral boundary
        // the discrete solution is that rigid motion.
        let m = small_mesh();
        let a = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
        let system = LayerSystem::new(&m, a.matrix()).unwrap();
        let c = [0.3, -0.7, 0.2, 0.5];
        let mut data = vec![0.0; m.n_dofs()];
        for n in 0..m.grid.n_nodes() {
            let x = m.grid.coords(n);
            let d = rigid_sharp([x[0], x[1]], x[2]);
            for r in 0..3 {
                data[3 * n + r] = (0..4).map(|k| d[r][k] * c[k]).sum();
            }
        }
        let (u, res) = system.solve(&vec![0.0; m.n_dofs()], &data);
        assert!(res < 1e-10);
        for (x, y) in u.iter().zip(&data) {
            assert!((x - y).abs() < 1e-10);
        }
        let fit = AnnulusFit::new(&m, 2.0, 3.5).unwrap();
        let RigidFit { c: got, residual: r, .. } = fit.fit(|n| [u[3 * n], u[3 * n + 1], u[3 * n + 2]]);
        assert!(r < 1e-10);
        for k in 0..4 {
            assert!((got[k] - c[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetry_defect_of_symmetric_matrix_is_zero() {
        let mut c = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                c[i][j] = (i + j) as f64 + 1.0;
            }
        }
        assert_eq!(symmetry_defect(&c), 0.0);
        c[0][3] += 1.0;
        assert!(symmetry_defect(&c) > 0.0);
    }
}
