//! Lowest eigenpairs of the generalised problem `Mx = λKx` for the largest
//! `λ`, i.e. the smallest `1/λ`, by block inverse iteration with Rayleigh–Ritz.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::skyline::SkylineCholesky;
use super::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub block: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { block: 6, max_iter: 300, rel_tol: 1e-9, seed: 7 }
    }
}

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Largest value of `xᵀMx / xᵀKx`.
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn m_orthonormalise(vs: &mut Vec<Vec<f64>>, k: &CsrMatrix) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    let mut kouts: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for v in vs.drain(..) {
        let mut v = v;
        for _ in 0..2 {
            for (u, ku) in out.iter().zip(&kouts) {
                let c = dot(&v, ku);
                for (a, b) in v.iter_mut().zip(u) {
                    *a -= c * b;
                }
            }
        }
        let kv = k.apply(&v);
        let nrm = dot(&v, &kv).sqrt();
        if nrm > 1e-300 {
            v.iter_mut().for_each(|a| *a /= nrm);
            out.push(v);
            kouts.push(kv.into_iter().map(|a| a / nrm).collect());
        }
    }
    *vs = out;
}

/// Maximises `xᵀMx / xᵀKx` for symmetric `M ≥ 0` and SPD `K`. The iteration
/// applies `K⁻¹M` to a block and projects onto the Ritz space.
pub fn largest_generalised(m: &CsrMatrix, k: &CsrMatrix, opts: EigenOptions) -> Result<EigenResult> {
    let n = k.n();
    let chol = SkylineCholesky::factor(k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let p = opts.block.max(1).min(n);
    let mut block: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut prev = f64::NAN;
    for it in 1..=opts.max_iter {
        let mut next: Vec<Vec<f64>> = block.iter().map(|v| chol.solve(&m.apply(v))).collect();
        m_orthonormalise(&mut next, k);
        if next.is_empty() {
            return Err(Error::Solver("inverse iteration block collapsed".into()));
        }
        let q = next.len();
        let mv: Vec<Vec<f64>> = next.iter().map(|v| m.apply(v)).collect();
        let h = nalgebra::DMatrix::from_fn(q, q, |i, j| 0.5 * (dot(&next[i], &mv[j]) + dot(&next[j], &mv[i])));
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..q).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        block = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, basis) in next.iter().enumerate() {
                    let w = eig.eigenvectors[(r, c)];
                    for (a, b) in v.iter_mut().zip(basis) {
                        *a += w * b;
                    }
                }
                v
            })
            .collect();
        let value = eig.eigenvalues[order[0]];
        if (value - prev).abs() <= opts.rel_tol * value.abs() {
            return Ok(EigenResult { value, vector: block[0].clone(), iterations: it });
        }
        prev = value;
    }
    Err(Error::NotConverged { what: "inverse iteration", iterations: opts.max_iter, residual: prev })
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    /// Smallest `λ` with `Ku = λMu`.
    pub value: f64,
    pub vector: Vec<f64>,
    /// `‖Ku − λMu‖ / ‖Mu‖`.
    pub residual: f64,
    pub iterations: usize,
}

/// Minimises `uᵀKu / uᵀMu` for SPD `K` and symmetric `M ≥ 0`.
pub fn smallest_eigenpair(k: &CsrMatrix, m: &CsrMatrix, opts: EigenOptions) -> Result<Eigenpair> {
    let r = largest_generalised(m, k, opts)?;
    if !(r.value > 0.0) {
        return Err(Error::Solver("mass form vanishes on the admissible space".into()));
    }
    let value = 1.0 / r.value;
    let ku = k.apply(&r.vector);
    let mu = m.apply(&r.vector);
    let num: f64 = ku.iter().zip(&mu).map(|(a, b)| (a - value * b).powi(2)).sum::<f64>().sqrt();
    let residual = num / dot(&mu, &mu).sqrt();
    Ok(Eigenpair { value, vector: r.vector, residual, iterations: r.iterations })
}

/// Rayleigh quotient `xᵀMx / xᵀKx`.
pub fn rayleigh(m: &CsrMatrix, k: &CsrMatrix, x: &[f64]) -> f64 {
    m.quadratic_form(x) / k.quadratic_form(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_problem() {
        let n = 20;
        let k = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0 + i as f64)).collect());
        let m = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect());
        let r = largest_generalised(&m, &k, EigenOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn discrete_laplacian_spectrum() {
        let n = 40;
        let dx = 1.0 / (n as f64 + 1.0);
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / (dx * dx)));
            if i > 0 {
                t.push((i, i - 1, -1.0 / (dx * dx)));
                t.push((i - 1, i, -1.0 / (dx * dx)));
            }
        }
        let k = CsrMatrix::from_triplets(n, t);
        let m = CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect());
        let p = smallest_eigenpair(&k, &m, EigenOptions { rel_tol: 1e-13, ..Default::default() }).unwrap();
        let exact = (2.0 - 2.0 * (std::f64::consts::PI * dx).cos()) / (dx * dx);
        assert!((p.value - exact).abs() < 1e-9 * exact);
        assert!(p.residual < 1e-6);
    }
}
