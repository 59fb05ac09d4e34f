//! Finite difference solver for the two-dimensional limit plate model on a
//! rectangle: the membrane system `ℒ′w′ = g′` and the fourth-order bending
//! equation `ℒ₃w₃ = g₃`, both clamped on the contour, with an optional point
//! condition `w₃(𝒪) = 0`.
//!
//! Both operators are assembled from a discrete energy `Σ (Bw)ᵀA(Bw)`, so
//! the matrices are symmetric by construction and positive definite once
//! the boundary is clamped.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elastic::ReducedStiffness;
use crate::error::{Error, Result};
use crate::fem::constrained::{solve_constrained, ConstraintSet, DofMap, LinearSolver};
use crate::fem::skyline::SkylineCholesky;
use crate::fem::sparse::{norm, CsrMatrix};
use crate::poly::Poly;
use crate::scalar::Scalar;

/// Coefficients of the limit operators as differential polynomials.
///
/// `membrane[i][j]` holds the coefficients of `∂₁², ∂₁∂₂, ∂₂²` in the entry
/// `ℒ′_ij`; `bending[k]` is the coefficient of `∂₁^{4−k}∂₂^k` in `ℒ₃`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorCoefficients<T> {
    pub membrane: [[[T; 3]; 2]; 2],
    pub bending: [T; 5],
}

impl<T: Scalar> OperatorCoefficients<T> {
    pub fn from_symbols(membrane: &[[Poly<T>; 2]; 2], bending: &Poly<T>) -> Self {
        Self {
            membrane: std::array::from_fn(|i| {
                std::array::from_fn(|j| std::array::from_fn(|k| membrane[i][j].coefficient(&[2 - k as u16, k as u16, 0])))
            }),
            bending: std::array::from_fn(|k| bending.coefficient(&[4 - k as u16, k as u16, 0])),
        }
    }

    pub fn to_f64(&self) -> OperatorCoefficients<f64> {
        OperatorCoefficients {
            membrane: self.membrane.clone().map(|r| r.map(|c| c.map(|v| v.to_f64()))),
            bending: self.bending.clone().map(|v| v.to_f64()),
        }
    }
}

/// `ℒ′ = 𝒟′(−∇)ᵀA⁰𝒟′(∇)` and `ℒ₃ = (1/6)𝒟₃(∇)ᵀA⁰𝒟₃(∇)`.
pub fn operator_coefficients<T: Scalar>(a0: &ReducedStiffness<T>) -> OperatorCoefficients<T> {
    OperatorCoefficients::from_symbols(&a0.membrane_symbol(), &a0.bending_symbol())
}

/// Rectangle `(0, a) × (0, b)` with `nx × ny` cells and an optional
/// support node `𝒪`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateDomain {
    pub a: f64,
    pub b: f64,
    pub nx: usize,
    pub ny: usize,
    pub point: Option<[usize; 2]>,
}

impl PlateDomain {
    pub fn new(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::InvalidInput(format!("plate sides must be positive, got {a} x {b}")));
        }
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidInput("plate grid needs at least 2 cells per side".into()));
        }
        Ok(Self { a, b, nx, ny, point: None })
    }

    /// Snaps `y` to the nearest node and uses it as the point support.
    pub fn with_point(mut self, y: [f64; 2]) -> Result<Self> {
        let i = (y[0] / self.dx()).round();
        let j = (y[1] / self.dy()).round();
        if !(i >= 1.0 && j >= 1.0 && i <= (self.nx - 1) as f64 && j <= (self.ny - 1) as f64) {
            return Err(Error::InvalidInput(format!("support point {y:?} is not strictly inside the plate grid")));
        }
        self.point = Some([i as usize, j as usize]);
        Ok(self)
    }

    pub fn dx(&self) -> f64 {
        self.a / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.b / self.ny as f64
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn node(&self, i: usize, j: usize) -> usize {
        i + (self.nx + 1) * j
    }

    pub fn coords(&self, node: usize) -> [f64; 2] {
        let i = node % (self.nx + 1);
        let j = node / (self.nx + 1);
        [i as f64 * self.dx(), j as f64 * self.dy()]
    }

    pub fn on_boundary(&self, node: usize) -> bool {
        let i = node % (self.nx + 1);
        let j = node / (self.nx + 1);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }

    /// Trapezoidal quadrature weight of a node.
    pub fn node_weight(&self, node: usize) -> f64 {
        let i = node % (self.nx + 1);
        let j = node / (self.nx + 1);
        let fx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        let fy = if j == 0 || j == self.ny { 0.5 } else { 1.0 };
        fx * fy * self.dx() * self.dy()
    }

    pub fn sample<V>(&self, f: impl Fn([f64; 2]) -> V) -> Vec<V> {
        (0..self.n_nodes()).map(|n| f(self.coords(n))).collect()
    }

    fn point_node(&self) -> Option<usize> {
        self.point.map(|[i, j]| self.node(i, j))
    }
}

fn check_reduced(a0: &ReducedStiffness<f64>) -> Result<()> {
    if !a0.matrix().is_positive_definite() {
        return Err(Error::InvalidMaterial("reduced stiffness is not positive definite".into()));
    }
    Ok(())
}

/// Membrane stiffness on all `2·(nx+1)(ny+1)` dofs (`2·node + component`).
///
/// Each cell contributes the average of four one-sided strain evaluations,
/// one anchored at each corner. The resulting `∂²` stencils are the compact
/// second-order ones and the matrix has no checkerboard kernel.
pub fn membrane_matrix(domain: &PlateDomain, a0: &ReducedStiffness<f64>) -> CsrMatrix {
    let (dx, dy) = (domain.dx(), domain.dy());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = a0.matrix();
    // Cell matrix over local dofs 2·(p + 2q) + c.
    let mut cell = [[0.0; 8]; 8];
    for p in 0..2 {
        for q in 0..2 {
            let mut b = [[0.0; 8]; 3];
            let sx = if p == 0 { 1.0 } else { -1.0 };
            let sy = if q == 0 { 1.0 } else { -1.0 };
            let here = p + 2 * q;
            let across_x = (1 - p) + 2 * q;
            let across_y = p + 2 * (1 - q);
            // ∂₁ of component c along the edge through the anchor.
            let d1 = |c: usize| [(2 * across_x + c, sx / dx), (2 * here + c, -sx / dx)];
            let d2 = |c: usize| [(2 * across_y + c, sy / dy), (2 * here + c, -sy / dy)];
            for (k, v) in d1(0) {
                b[0][k] += v;
            }
            for (k, v) in d2(1) {
                b[1][k] += v;
            }
            for (k, v) in d2(0).into_iter().chain(d1(1)) {
                b[2][k] += s * v;
            }
            for r in 0..8 {
                for c in 0..8 {
                    let mut acc = 0.0;
                    for m in 0..3 {
                        for n in 0..3 {
                            acc += b[m][r] * a[(m, n)] * b[n][c];
                        }
                    }
                    cell[r][c] += 0.25 * dx * dy * acc;
                }
            }
        }
    }
    let mut triplets = Vec::with_capacity(64 * domain.nx * domain.ny);
    for j in 0..domain.ny {
        for i in 0..domain.nx {
            let nodes = [domain.node(i, j), domain.node(i + 1, j), domain.node(i, j + 1), domain.node(i + 1, j + 1)];
            for r in 0..8 {
                for c in 0..8 {
                    if cell[r][c] != 0.0 {
                        triplets.push((2 * nodes[r / 2] + r % 2, 2 * nodes[c / 2] + c % 2, cell[r][c]));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(2 * domain.n_nodes(), triplets)
}

/// Bending stiffness on all nodes: `Σ_nodes ω_n (𝒟₃w)ᵀ(A⁰/6)(𝒟₃w)` with
/// centred second differences and trapezoidal weights `ω_n`. Ghost values
/// outside the rectangle are even reflections, which encodes the clamped
/// condition `∂_n w₃ = 0` for boundary nodes where `w₃ = 0`.
pub fn bending_matrix(domain: &PlateDomain, a0: &ReducedStiffness<f64>) -> CsrMatrix {
    let (dx, dy) = (domain.dx(), domain.dy());
    let (nx, ny) = (domain.nx as i64, domain.ny as i64);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = a0.matrix().scale(&(1.0 / 6.0));
    let reflect = |k: i64, n: i64| -> usize {
        let k = if k < 0 { -k } else if k > n { 2 * n - k } else { k };
        k as usize
    };
    let mut triplets = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            let node = domain.node(i as usize, j as usize);
            let w = domain.node_weight(node);
            let mut rows: [Vec<(usize, f64)>; 3] = Default::default();
            let mut push = |row: usize, di: i64, dj: i64, v: f64| {
                let idx = domain.node(reflect(i + di, nx), reflect(j + dj, ny));
                match rows[row].iter_mut().find(|(k, _)| *k == idx) {
                    Some(slot) => slot.1 += v,
                    None => rows[row].push((idx, v)),
                }
            };
            for (d, v) in [(-1, 1.0), (0, -2.0), (1, 1.0)] {
                push(0, d, 0, s * v / (dx * dx));
                push(1, 0, d, s * v / (dy * dy));
            }
            for (di, dj, v) in [(1, 1, 1.0), (1, -1, -1.0), (-1, 1, -1.0), (-1, -1, 1.0)] {
                push(2, di, dj, v / (4.0 * dx * dy));
            }
            for m in 0..3 {
                for n in 0..3 {
                    let amn = a[(m, n)];
                    if amn == 0.0 {
                        continue;
                    }
                    for &(r, vr) in &rows[m] {
                        for &(c, vc) in &rows[n] {
                            triplets.push((r, c, w * amn * vr * vc));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(domain.n_nodes(), triplets)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MembraneSolution {
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    /// `‖Ku − f‖ / ‖f‖` on the free dofs (0 for a vanishing load).
    pub residual: f64,
    /// `½uᵀKu − fᵀu`.
    pub energy: f64,
}

pub fn solve_membrane(domain: &PlateDomain, a0: &ReducedStiffness<f64>, g: &[[f64; 2]]) -> Result<MembraneSolution> {
    check_reduced(a0)?;
    if g.len() != domain.n_nodes() {
        return Err(Error::InvalidInput(format!("membrane load has {} samples, grid has {} nodes", g.len(), domain.n_nodes())));
    }
    if g.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("membrane load has non-finite samples".into()));
    }
    let k = membrane_matrix(domain, a0);
    let mut f = vec![0.0; 2 * domain.n_nodes()];
    for (n, gn) in g.iter().enumerate() {
        let w = domain.node_weight(n);
        f[2 * n] = w * gn[0];
        f[2 * n + 1] = w * gn[1];
    }
    let map = DofMap::new(f.len(), |d| domain.on_boundary(d / 2));
    let kr = k.restrict(&map.free_index, map.n_free);
    let fr = map.restrict_vec(&f);
    let chol = SkylineCholesky::factor(&kr)?;
    let ur = chol.solve(&fr);
    let kur = kr.apply(&ur);
    let fnorm = norm(&fr);
    let residual = if fnorm == 0.0 {
        0.0
    } else {
        kur.iter().zip(&fr).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / fnorm
    };
    let energy = 0.5 * ur.iter().zip(&kur).map(|(a, b)| a * b).sum::<f64>() - ur.iter().zip(&fr).map(|(a, b)| a * b).sum::<f64>();
    let mut u = vec![0.0; f.len()];
    map.scatter(&ur, &mut u);
    Ok(MembraneSolution {
        w1: u.iter().step_by(2).copied().collect(),
        w2: u.iter().skip(1).step_by(2).copied().collect(),
        residual,
        energy,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BendingSolution {
    pub w3: Vec<f64>,
    /// Reaction at `𝒪` (the Lagrange multiplier), if the point condition is on.
    pub multiplier: Option<f64>,
    pub constraint_residual: f64,
    /// `½wᵀKw − fᵀw`.
    pub energy: f64,
}

pub fn solve_bending(domain: &PlateDomain, a0: &ReducedStiffness<f64>, g3: &[f64]) -> Result<BendingSolution> {
    check_reduced(a0)?;
    if g3.len() != domain.n_nodes() {
        return Err(Error::InvalidInput(format!("bending load has {} samples, grid has {} nodes", g3.len(), domain.n_nodes())));
    }
    if g3.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("bending load has non-finite samples".into()));
    }
    let k = bending_matrix(domain, a0);
    let f: Vec<f64> = g3.iter().enumerate().map(|(n, g)| domain.node_weight(n) * g).collect();
    let mut cons = ConstraintSet::new();
    for n in (0..domain.n_nodes()).filter(|&n| domain.on_boundary(n)) {
        cons.fix(n, 0.0);
    }
    if let Some(p) = domain.point_node() {
        cons.add_row(vec![(p, 1.0)], 0.0);
    }
    let sol = solve_constrained(&k, &f, &cons, LinearSolver::Direct)?;
    let ku = k.apply(&sol.u);
    let energy = 0.5 * sol.u.iter().zip(&ku).map(|(a, b)| a * b).sum::<f64>() - sol.u.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
    Ok(BendingSolution {
        multiplier: domain.point.map(|_| sol.multipliers[0]),
        constraint_residual: sol.constraint_residual,
        w3: sol.u,
        energy,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KirchhoffSolution {
    pub membrane: MembraneSolution,
    pub bending: BendingSolution,
}

impl KirchhoffSolution {
    /// Total potential energy of both parts.
    pub fn energy(&self) -> f64 {
        self.membrane.energy + self.bending.energy
    }

    /// Writes `y1,y2,w1,w2,w3` per node.
    pub fn write_csv(&self, domain: &PlateDomain, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["y1", "y2", "w1", "w2", "w3"])?;
        for n in 0..domain.n_nodes() {
            let [y1, y2] = domain.coords(n);
            w.serialize((y1, y2, self.membrane.w1[n], self.membrane.w2[n], self.bending.w3[n]))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn solve(domain: &PlateDomain, a0: &ReducedStiffness<f64>, load: &[[f64; 3]]) -> Result<KirchhoffSolution> {
    let gm: Vec<[f64; 2]> = load.iter().map(|g| [g[0], g[1]]).collect();
    let gb: Vec<f64> = load.iter().map(|g| g[2]).collect();
    Ok(KirchhoffSolution { membrane: solve_membrane(domain, a0, &gm)?, bending: solve_bending(domain, a0, &gb)? })
}

/// Load identifiers accepted on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadSpec {
    /// The same value in all three components.
    Constant(f64),
    /// `sin(πy₁/a) sin(πy₂/b)` in all three components.
    SineBump,
    /// Nodal CSV with columns `g1,g2,g3`, one row per node in grid order.
    File(std::path::PathBuf),
}

impl LoadSpec {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(Self::File(path.into()));
        }
        match s {
            "constant" => Ok(Self::Constant(1.0)),
            "sine-bump" => Ok(Self::SineBump),
            other => match other.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(v)) => Ok(Self::Constant(v)),
                _ => Err(Error::Config(format!("unknown load '{other}' (constant[:v] | sine-bump | file:<csv>)"))),
            },
        }
    }

    pub fn sample(&self, domain: &PlateDomain) -> Result<Vec<[f64; 3]>> {
        match self {
            Self::Constant(v) => Ok(vec![[*v; 3]; domain.n_nodes()]),
            Self::SineBump => Ok(domain.sample(|y| {
                let v = (std::f64::consts::PI * y[0] / domain.a).sin() * (std::f64::consts::PI * y[1] / domain.b).sin();
                [v; 3]
            })),
            Self::File(path) => read_load_csv(path, domain.n_nodes()),
        }
    }
}

fn read_load_csv(path: &Path, n: usize) -> Result<Vec<[f64; 3]>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<[f64; 3]> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() != n {
        return Err(Error::Config(format!("{} has {} rows, the grid has {n} nodes", path.display(), rows.len())));
    }
    Ok(rows)
}

/// Smooth separable test fields for manufactured solutions.
pub mod manufactured {
    use super::OperatorCoefficients;

    /// `c₀ + A cos(ωx + φ)`.
    #[derive(Clone, Copy, Debug)]
    pub struct Trig {
        pub offset: f64,
        pub amplitude: f64,
        pub freq: f64,
        pub phase: f64,
    }

    impl Trig {
        pub fn sin(freq: f64) -> Self {
            Self { offset: 0.0, amplitude: 1.0, freq, phase: -std::f64::consts::FRAC_PI_2 }
        }

        /// `sin²(freq·x) = (1 − cos(2·freq·x))/2`.
        pub fn sin_squared(freq: f64) -> Self {
            Self { offset: 0.5, amplitude: -0.5, freq: 2.0 * freq, phase: 0.0 }
        }

        pub fn derivative(&self, n: u32, x: f64) -> f64 {
            let arg = self.freq * x + self.phase + n as f64 * std::f64::consts::FRAC_PI_2;
            let base = self.amplitude * self.freq.powi(n as i32) * arg.cos();
            if n == 0 {
                self.offset + base
            } else {
                base
            }
        }
    }

    /// `f(y₁) g(y₂)`.
    #[derive(Clone, Copy, Debug)]
    pub struct Separable {
        pub fx: Trig,
        pub fy: Trig,
    }

    impl Separable {
        pub fn derivative(&self, n1: u32, n2: u32, y: [f64; 2]) -> f64 {
            self.fx.derivative(n1, y[0]) * self.fy.derivative(n2, y[1])
        }

        pub fn value(&self, y: [f64; 2]) -> f64 {
            self.derivative(0, 0, y)
        }
    }

    pub fn apply_membrane(c: &OperatorCoefficients<f64>, w: &[Separable; 2], y: [f64; 2]) -> [f64; 2] {
        std::array::from_fn(|i| {
            (0..2)
                .map(|j| (0..3).map(|k| c.membrane[i][j][k] * w[j].derivative(2 - k as u32, k as u32, y)).sum::<f64>())
                .sum()
        })
    }

    pub fn apply_bending(c: &OperatorCoefficients<f64>, w: &Separable, y: [f64; 2]) -> f64 {
        (0..5).map(|k| c.bending[k] * w.derivative(4 - k as u32, k as u32, y)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::manufactured::*;
    use super::*;
    use crate::elastic::StiffnessMatrix;
    use crate::scalar::Surd;

    fn iso(l: f64, m: f64) -> ReducedStiffness<f64> {
        StiffnessMatrix::isotropic(l, m).unwrap().reduced()
    }

    #[test]
    fn isotropic_coefficients_exact() {
        let a = StiffnessMatrix::<Surd>::isotropic(Surd::int(1), Surd::int(1)).unwrap();
        let c = operator_coefficients(&a.reduced());
        let b = Surd::ratio(2, 9);
        assert_eq!(c.bending, [b.clone(), Surd::int(0), b.clone() * Surd::int(2), Surd::int(0), b]);
        // ℒ′ = −μΔ − (λ′+μ)∇∇ᵀ with λ′ = 2/3.
        let lp = Surd::ratio(2, 3);
        assert_eq!(c.membrane[0][0], [-(lp.clone() + Surd::int(2)), Surd::int(0), Surd::int(-1)]);
        assert_eq!(c.membrane[0][1], [Surd::int(0), -(lp + Surd::int(1)), Surd::int(0)]);
    }

    #[test]
    fn matrices_symmetric() {
        let d = PlateDomain::new(1.0, 2.0, 5, 6).unwrap();
        let a0 = iso(1.0, 2.0);
        assert!(membrane_matrix(&d, &a0).is_symmetric(1e-10));
        assert!(bending_matrix(&d, &a0).is_symmetric(1e-8));
    }

    #[test]
    fn zero_load_zero_solution() {
        let d = PlateDomain::new(1.0, 1.0, 8, 8).unwrap().with_point([0.5, 0.5]).unwrap();
        let s = solve(&d, &iso(1.0, 1.0), &vec![[0.0; 3]; d.n_nodes()]).unwrap();
        assert!(s.membrane.w1.iter().chain(&s.bending.w3).all(|v| *v == 0.0));
    }

    #[test]
    fn point_on_boundary_rejected() {
        let d = PlateDomain::new(1.0, 1.0, 8, 8).unwrap();
        assert!(d.with_point([0.0, 0.5]).is_err());
    }

    #[test]
    fn bending_manufactured_small() {
        let d = PlateDomain::new(1.0, 1.0, 32, 32).unwrap();
        let a0 = iso(1.0, 1.0);
        let c = operator_coefficients(&a0);
        let w = Separable { fx: Trig::sin_squared(std::f64::consts::PI), fy: Trig::sin_squared(std::f64::consts::PI) };
        let g = d.sample(|y| apply_bending(&c, &w, y));
        let s = solve_bending(&d, &a0, &g).unwrap();
        let err = (0..d.n_nodes()).map(|n| (s.w3[n] - w.value(d.coords(n))).abs()).fold(0.0, f64::max);
        assert!(err < 1.2e-2, "{err}");
    }
}
