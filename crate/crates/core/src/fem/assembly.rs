//! Trilinear hexahedral elements with full 2x2x2 Gauss quadrature.

use std::collections::HashMap;

use rayon::prelude::*;

use super::grid::HexGrid;
use super::sparse::CsrMatrix;
use crate::dense::Mat;

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Shape function values and physical gradients at one quadrature point of a
/// box element with edge lengths `size`.
struct QuadPoint {
    n: [f64; 8],
    grad: [[f64; 3]; 8],
    weight: f64,
}

fn quadrature(size: [f64; 3]) -> Vec<QuadPoint> {
    let det = size[0] * size[1] * size[2] / 8.0;
    let mut pts = Vec::with_capacity(8);
    for &gz in &GAUSS {
        for &gy in &GAUSS {
            for &gx in &GAUSS {
                let xi = [gx, gy, gz];
                let mut n = [0.0; 8];
                let mut grad = [[0.0; 3]; 8];
                for l in 0..8 {
                    let s = [
                        if l & 1 == 1 { 1.0 } else { -1.0 },
                        if (l >> 1) & 1 == 1 { 1.0 } else { -1.0 },
                        if (l >> 2) & 1 == 1 { 1.0 } else { -1.0 },
                    ];
                    let f = [0.5 * (1.0 + s[0] * xi[0]), 0.5 * (1.0 + s[1] * xi[1]), 0.5 * (1.0 + s[2] * xi[2])];
                    n[l] = f[0] * f[1] * f[2];
                    grad[l] = [
                        0.5 * s[0] * f[1] * f[2] * 2.0 / size[0],
                        0.5 * s[1] * f[0] * f[2] * 2.0 / size[1],
                        0.5 * s[2] * f[0] * f[1] * 2.0 / size[2],
                    ];
                }
                pts.push(QuadPoint { n, grad, weight: det });
            }
        }
    }
    pts
}

/// Strain-displacement matrix (6x24) from the shape gradients, Mandel ordering.
fn strain_matrix(grad: &[[f64; 3]; 8]) -> [[f64; 24]; 6] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut b = [[0.0; 24]; 6];
    for (l, g) in grad.iter().enumerate() {
        let c = 3 * l;
        b[0][c] = g[0];
        b[1][c + 1] = g[1];
        b[2][c] = s * g[1];
        b[2][c + 1] = s * g[0];
        b[3][c] = s * g[2];
        b[3][c + 2] = s * g[0];
        b[4][c + 1] = s * g[2];
        b[4][c + 2] = s * g[1];
        b[5][c + 2] = g[2];
    }
    b
}

pub type ElementMatrix = [[f64; 24]; 24];

/// `∫ BᵀAB` over a box element.
pub fn element_stiffness(size: [f64; 3], a: &Mat<f64>) -> ElementMatrix {
    let mut k = [[0.0; 24]; 24];
    for q in quadrature(size) {
        let b = strain_matrix(&q.grad);
        let mut ab = [[0.0; 24]; 6];
        for i in 0..6 {
            for j in 0..6 {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                for c in 0..24 {
                    ab[i][c] += aij * b[j][c];
                }
            }
        }
        for r in 0..24 {
            for i in 0..6 {
                let bir = b[i][r];
                if bir == 0.0 {
                    continue;
                }
                let w = bir * q.weight;
                for c in 0..24 {
                    k[r][c] += w * ab[i][c];
                }
            }
        }
    }
    k
}

/// Element formulation for [`assemble_elastic_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ElementKind {
    #[default]
    Trilinear,
    /// Trilinear element enriched with the nine bubble modes `1 − ξ_k²`
    /// per component, condensed out element by element. Represents pure
    /// bending exactly, so flat elements do not lock.
    IncompatibleModes,
}

/// Gradients of the bubble modes `1 − ξ_k²` at a reference point.
fn bubble_gradients(xi: [f64; 3], size: [f64; 3]) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for k in 0..3 {
        g[k][k] = -2.0 * xi[k] * 2.0 / size[k];
    }
    g
}

/// Static condensation of the incompatible modes out of the trilinear
/// element matrix.
pub fn element_stiffness_incompatible(size: [f64; 3], a: &Mat<f64>) -> ElementMatrix {
    let kuu = element_stiffness(size, a);
    let det = size[0] * size[1] * size[2] / 8.0;
    let mut kua = nalgebra::DMatrix::<f64>::zeros(24, 9);
    let mut kaa = nalgebra::DMatrix::<f64>::zeros(9, 9);
    let am = nalgebra::DMatrix::from_fn(6, 6, |i, j| a[(i, j)]);
    for &gz in &GAUSS {
        for &gy in &GAUSS {
            for &gx in &GAUSS {
                let xi = [gx, gy, gz];
                let grad = shape_gradients(xi, size);
                let bu = strain_matrix(&grad);
                let bg = bubble_gradients(xi, size);
                // Reuse the nodal strain layout: columns 3k..3k+3 are the
                // three components of bubble k.
                let padded: [[f64; 3]; 8] = std::array::from_fn(|l| if l < 3 { bg[l] } else { [0.0; 3] });
                let ba = strain_matrix(&padded);
                let bu = nalgebra::DMatrix::from_fn(6, 24, |i, j| bu[i][j]);
                let ba = nalgebra::DMatrix::from_fn(6, 9, |i, j| ba[i][j]);
                kua += bu.transpose() * &am * &ba * det;
                kaa += ba.transpose() * &am * &ba * det;
            }
        }
    }
    let inv = kaa.cholesky().expect("bubble block is positive definite").inverse();
    let corr = &kua * inv * kua.transpose();
    let mut k = kuu;
    for r in 0..24 {
        for c in 0..24 {
            k[r][c] -= 0.5 * (corr[(r, c)] + corr[(c, r)]);
        }
    }
    k
}

fn shape_gradients(xi: [f64; 3], size: [f64; 3]) -> [[f64; 3]; 8] {
    let mut grad = [[0.0; 3]; 8];
    for (l, g) in grad.iter_mut().enumerate() {
        let s = [
            if l & 1 == 1 { 1.0 } else { -1.0 },
            if (l >> 1) & 1 == 1 { 1.0 } else { -1.0 },
            if (l >> 2) & 1 == 1 { 1.0 } else { -1.0 },
        ];
        let f = [0.5 * (1.0 + s[0] * xi[0]), 0.5 * (1.0 + s[1] * xi[1]), 0.5 * (1.0 + s[2] * xi[2])];
        *g = [s[0] * f[1] * f[2] / size[0], s[1] * f[0] * f[2] / size[1], s[2] * f[0] * f[1] / size[2]];
    }
    grad
}

/// Which derivative of a displacement component a quadratic term uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Probe {
    Value,
    D(usize),
}

/// A term `c ∫ |probe(u_comp)|²` of a diagonal quadratic form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormTerm {
    pub comp: usize,
    pub probe: Probe,
    pub coeff: f64,
}

/// Gram matrices `∫ probe(N_a) probe(N_b)` for the four probes.
fn probe_grams(size: [f64; 3]) -> [[[f64; 8]; 8]; 4] {
    let mut g = [[[0.0; 8]; 8]; 4];
    for q in quadrature(size) {
        for a in 0..8 {
            for b in 0..8 {
                g[0][a][b] += q.weight * q.n[a] * q.n[b];
                for d in 0..3 {
                    g[1 + d][a][b] += q.weight * q.grad[a][d] * q.grad[b][d];
                }
            }
        }
    }
    g
}

fn probe_slot(p: Probe) -> usize {
    match p {
        Probe::Value => 0,
        Probe::D(d) => 1 + d,
    }
}

/// Global CSR pattern for a vector field with 3 components per node.
fn vector_pattern(grid: &HexGrid) -> CsrMatrix {
    let [nx, ny, nz] = grid.dims();
    let n = 3 * grid.n_nodes();
    let mut rows = Vec::with_capacity(n);
    for node in 0..grid.n_nodes() {
        let [ix, iy, iz] = grid.node_indices(node);
        let mut neighbours = Vec::with_capacity(27);
        for jy in iy.saturating_sub(1)..=(iy + 1).min(ny - 1) {
            for jx in ix.saturating_sub(1)..=(ix + 1).min(nx - 1) {
                for jz in iz.saturating_sub(1)..=(iz + 1).min(nz - 1) {
                    neighbours.push(grid.node(jx, jy, jz));
                }
            }
        }
        neighbours.sort_unstable();
        let cols: Vec<usize> = neighbours.iter().flat_map(|&m| [3 * m, 3 * m + 1, 3 * m + 2]).collect();
        for _ in 0..3 {
            rows.push(cols.clone());
        }
    }
    CsrMatrix::from_pattern(n, rows)
}

fn size_key(s: [f64; 3]) -> [u64; 3] {
    [s[0].to_bits(), s[1].to_bits(), s[2].to_bits()]
}

/// Assembles `∫ D(∇)uᵀ A D(∇)v` on the grid. Element matrices are computed
/// in parallel and cached by element size; accumulation into the global
/// matrix is sequential in element order, so the result does not depend on
/// the thread count.
pub fn assemble_elastic(grid: &HexGrid, a: &Mat<f64>) -> CsrMatrix {
    assemble_elastic_with(grid, a, ElementKind::Trilinear)
}

pub fn assemble_elastic_with(grid: &HexGrid, a: &Mat<f64>, kind: ElementKind) -> CsrMatrix {
    let elements: Vec<[usize; 3]> = grid.elements().collect();
    let mut sizes: Vec<[u64; 3]> = elements.iter().map(|&e| size_key(grid.element_size(e))).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let cache: HashMap<[u64; 3], ElementMatrix> = sizes
        .par_iter()
        .map(|k| {
            let s = [f64::from_bits(k[0]), f64::from_bits(k[1]), f64::from_bits(k[2])];
            let ke = match kind {
                ElementKind::Trilinear => element_stiffness(s, a),
                ElementKind::IncompatibleModes => element_stiffness_incompatible(s, a),
            };
            (*k, ke)
        })
        .collect();
    let mut m = vector_pattern(grid);
    for e in elements {
        let ke = &cache[&size_key(grid.element_size(e))];
        let nodes = grid.element_nodes(e);
        for (la, &na) in nodes.iter().enumerate() {
            for (lb, &nb) in nodes.iter().enumerate() {
                for ca in 0..3 {
                    for cb in 0..3 {
                        let v = ke[3 * la + ca][3 * lb + cb];
                        if v != 0.0 {
                            m.add(3 * na + ca, 3 * nb + cb, v);
                        }
                    }
                }
            }
        }
    }
    m
}

/// Assembles a diagonal quadratic form whose per-element terms come from
/// `terms(centroid, size)`. Coefficients are evaluated once per element at
/// its centroid.
pub fn assemble_form(grid: &HexGrid, terms: impl Fn([f64; 3], [f64; 3]) -> Vec<FormTerm>) -> CsrMatrix {
    let mut cache: HashMap<[u64; 3], [[[f64; 8]; 8]; 4]> = HashMap::new();
    let mut m = vector_pattern(grid);
    for e in grid.elements() {
        let size = grid.element_size(e);
        let grams = *cache.entry(size_key(size)).or_insert_with(|| probe_grams(size));
        let nodes = grid.element_nodes(e);
        for t in terms(grid.element_centroid(e), size) {
            if t.coeff == 0.0 {
                continue;
            }
            let g = &grams[probe_slot(t.probe)];
            for (la, &na) in nodes.iter().enumerate() {
                for (lb, &nb) in nodes.iter().enumerate() {
                    m.add(3 * na + t.comp, 3 * nb + t.comp, t.coeff * g[la][lb]);
                }
            }
        }
    }
    m
}

/// Consistent load vector `∫ f·φ` for a body force given pointwise, using
/// a 3-point Gauss rule per direction.
pub fn assemble_body_load(grid: &HexGrid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let g3 = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
    let mut rhs = vec![0.0; 3 * grid.n_nodes()];
    for e in grid.elements() {
        let size = grid.element_size(e);
        let lo = [grid.xs[e[0]], grid.ys[e[1]], grid.zs[e[2]]];
        let nodes = grid.element_nodes(e);
        let jac = size[0] * size[1] * size[2] / 8.0;
        for &(gz, wz) in &g3 {
            for &(gy, wy) in &g3 {
                for &(gx, wx) in &g3 {
                    let t = [0.5 * (gx + 1.0), 0.5 * (gy + 1.0), 0.5 * (gz + 1.0)];
                    let x = [lo[0] + t[0] * size[0], lo[1] + t[1] * size[1], lo[2] + t[2] * size[2]];
                    let fv = f(x);
                    let w = wx * wy * wz * jac;
                    for (l, &n) in nodes.iter().enumerate() {
                        let sh = corner_weight(l, t);
                        for c in 0..3 {
                            rhs[3 * n + c] += w * sh * fv[c];
                        }
                    }
                }
            }
        }
    }
    rhs
}

/// Consistent load `∫ g·φ` over the top (`plus = true`) or bottom face.
pub fn assemble_face_load(grid: &HexGrid, plus: bool, g: impl Fn([f64; 3]) -> [f64; 3]) -> Vec<f64> {
    let g3 = [(-0.774_596_669_241_483_4, 5.0 / 9.0), (0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
    let [nx, ny, nz] = grid.dims();
    let iz = if plus { nz - 1 } else { 0 };
    let z = grid.zs[iz];
    let mut rhs = vec![0.0; 3 * grid.n_nodes()];
    for ey in 0..ny - 1 {
        for ex in 0..nx - 1 {
            let (dx, dy) = (grid.xs[ex + 1] - grid.xs[ex], grid.ys[ey + 1] - grid.ys[ey]);
            let nodes = [
                grid.node(ex, ey, iz),
                grid.node(ex + 1, ey, iz),
                grid.node(ex, ey + 1, iz),
                grid.node(ex + 1, ey + 1, iz),
            ];
            for &(gy, wy) in &g3 {
                for &(gx, wx) in &g3 {
                    let t = [0.5 * (gx + 1.0), 0.5 * (gy + 1.0)];
                    let x = [grid.xs[ex] + t[0] * dx, grid.ys[ey] + t[1] * dy, z];
                    let gv = g(x);
                    let w = wx * wy * dx * dy / 4.0;
                    for (l, &n) in nodes.iter().enumerate() {
                        let sx = if l & 1 == 1 { t[0] } else { 1.0 - t[0] };
                        let sy = if l & 2 == 2 { t[1] } else { 1.0 - t[1] };
                        for c in 0..3 {
                            rhs[3 * n + c] += w * sx * sy * gv[c];
                        }
                    }
                }
            }
        }
    }
    rhs
}

fn corner_weight(l: usize, t: [f64; 3]) -> f64 {
    let f = |bit: usize, x: f64| if bit == 1 { x } else { 1.0 - x };
    f(l & 1, t[0]) * f((l >> 1) & 1, t[1]) * f((l >> 2) & 1, t[2])
}

/// Rigid displacement basis evaluated at the grid nodes: three translations
/// and three rotations about the coordinate axes.
pub fn rigid_modes(grid: &HexGrid) -> Vec<Vec<f64>> {
    let n = grid.n_nodes();
    let mut modes = vec![vec![0.0; 3 * n]; 6];
    for node in 0..n {
        let [x, y, z] = grid.coords(node);
        for c in 0..3 {
            modes[c][3 * node + c] = 1.0;
        }
        let rot = [[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]];
        for (k, r) in rot.iter().enumerate() {
            for c in 0..3 {
                modes[3 + k][3 * node + c] = r[c];
            }
        }
    }
    modes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::StiffnessMatrix;

    #[test]
    fn single_cube_kernel_is_rigid_motions() {
        let a = StiffnessMatrix::isotropic(0.0, 0.5).unwrap();
        let k = element_stiffness([1.0, 1.0, 1.0], a.matrix());
        let m = nalgebra::DMatrix::from_fn(24, 24, |i, j| k[i][j]);
        let eig = m.symmetric_eigen();
        let zeros = eig.eigenvalues.iter().filter(|v| v.abs() < 1e-10).count();
        assert_eq!(zeros, 6);
        assert!(eig.eigenvalues.iter().all(|v| *v > -1e-10));
    }

    #[test]
    fn element_matrix_is_symmetric() {
        let a = StiffnessMatrix::isotropic(1.3, 0.7).unwrap();
        let k = element_stiffness([0.3, 1.1, 0.2], a.matrix());
        for i in 0..24 {
            for j in 0..24 {
                assert!((k[i][j] - k[j][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incompatible_element_bends_without_locking() {
        let a = StiffnessMatrix::isotropic(0.0, 0.5).unwrap();
        let size = [2.0, 1.0, 0.2];
        // u = (xz, 0, −x²/2): pure bending with ε₁₁ = z.
        let mut u = [0.0; 24];
        for l in 0..8 {
            let x = if l & 1 == 1 { 1.0 } else { -1.0 } * size[0] / 2.0;
            let z = if (l >> 2) & 1 == 1 { 1.0 } else { -1.0 } * size[2] / 2.0;
            u[3 * l] = x * z;
            u[3 * l + 2] = -x * x / 2.0;
        }
        let energy = |k: &ElementMatrix| -> f64 { (0..24).map(|i| (0..24).map(|j| u[i] * k[i][j] * u[j]).sum::<f64>()).sum() };
        let exact = a.matrix()[(0, 0)] * size[0] * size[1] * size[2].powi(3) / 12.0;
        let enhanced = energy(&element_stiffness_incompatible(size, a.matrix()));
        let plain = energy(&element_stiffness(size, a.matrix()));
        assert!((enhanced - exact).abs() < 1e-12 * exact, "{enhanced} vs {exact}");
        assert!(plain > 10.0 * exact);
        let k = element_stiffness_incompatible(size, a.matrix());
        let m = nalgebra::DMatrix::from_fn(24, 24, |i, j| k[i][j]);
        assert_eq!(m.symmetric_eigen().eigenvalues.iter().filter(|v| v.abs() < 1e-10).count(), 6);
    }
}
