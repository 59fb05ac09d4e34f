//! Dirichlet elimination and point constraints enforced by Lagrange
//! multipliers.
//!
//! Point constraints are few, so the saddle system is reduced to a small
//! Schur complement on the multipliers. The main solve stays SPD.

use super::cg::{pcg, CgOptions};
use super::skyline::SkylineCholesky;
use super::sparse::{dot, CsrMatrix};
use crate::error::{Error, Result};

/// Splits the degrees of freedom into free and prescribed ones.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// `Some(k)` if global dof `i` is the `k`-th free unknown.
    pub free_index: Vec<Option<usize>>,
    pub n_free: usize,
}

impl DofMap {
    pub fn new(n: usize, fixed: impl Fn(usize) -> bool) -> Self {
        let mut free_index = vec![None; n];
        let mut k = 0;
        for (i, slot) in free_index.iter_mut().enumerate() {
            if !fixed(i) {
                *slot = Some(k);
                k += 1;
            }
        }
        Self { free_index, n_free: k }
    }

    pub fn restrict_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (i, k) in self.free_index.iter().enumerate() {
            if let Some(k) = k {
                out[*k] = v[i];
            }
        }
        out
    }

    /// Writes free values into a full vector that already holds the
    /// prescribed values.
    pub fn scatter(&self, free: &[f64], full: &mut [f64]) {
        for (i, k) in self.free_index.iter().enumerate() {
            if let Some(k) = k {
                full[i] = free[*k];
            }
        }
    }
}

/// Reduced system for `K u = f` with `u` prescribed on fixed dofs: returns
/// `(K_ff, f_f − K_fc u_c)`.
pub fn eliminate(k: &CsrMatrix, f: &[f64], prescribed: &[f64], map: &DofMap) -> (CsrMatrix, Vec<f64>) {
    let kff = k.restrict(&map.free_index, map.n_free);
    let mut lifted = prescribed.to_vec();
    for (i, idx) in map.free_index.iter().enumerate() {
        if idx.is_some() {
            lifted[i] = 0.0;
        }
    }
    let kl = k.apply(&lifted);
    let mut rhs = vec![0.0; map.n_free];
    for (i, idx) in map.free_index.iter().enumerate() {
        if let Some(kk) = idx {
            rhs[*kk] = f[i] - kl[i];
        }
    }
    (kff, rhs)
}

/// Dirichlet values plus linear constraints `rowᵀu = target`.
#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub dirichlet: Vec<(usize, f64)>,
    /// Sparse rows `(index, coefficient)` with their targets.
    pub lagrange: Vec<(Vec<(usize, f64)>, f64)>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fix(&mut self, dof: usize, value: f64) -> &mut Self {
        self.dirichlet.push((dof, value));
        self
    }

    pub fn add_row(&mut self, row: Vec<(usize, f64)>, target: f64) -> &mut Self {
        self.lagrange.push((row, target));
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &(d, v) in &self.dirichlet {
            if d >= n {
                return Err(Error::InvalidInput(format!("dirichlet dof {d} out of range")));
            }
            if seen[d] {
                return Err(Error::InvalidInput(format!("duplicate dirichlet dof {d}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite dirichlet value at {d}")));
            }
            seen[d] = true;
        }
        for (row, _) in &self.lagrange {
            if row.iter().any(|&(i, _)| i >= n) {
                return Err(Error::InvalidInput("constraint row index out of range".into()));
            }
        }
        Ok(())
    }

    pub fn dof_map(&self, n: usize) -> DofMap {
        let mut fixed = vec![false; n];
        for &(d, _) in &self.dirichlet {
            fixed[d] = true;
        }
        DofMap::new(n, |i| fixed[i])
    }
}

/// How the reduced SPD systems are solved.
#[derive(Clone, Copy, Debug)]
pub enum LinearSolver {
    Cg(CgOptions),
    Direct,
}

#[derive(Clone, Debug)]
pub struct ConstrainedSolution {
    pub u: Vec<f64>,
    pub multipliers: Vec<f64>,
    /// Largest `|rowᵀu − target|`.
    pub constraint_residual: f64,
}

/// Solves `K u = f` subject to the constraint set. Multipliers follow the
/// convention `K u = f + Σ λ_k row_k`, so a multiplier is the reaction the
/// constraint exerts.
pub fn solve_constrained(k: &CsrMatrix, f: &[f64], cons: &ConstraintSet, solver: LinearSolver) -> Result<ConstrainedSolution> {
    let n = k.n();
    cons.validate(n)?;
    let map = cons.dof_map(n);
    let mut full = vec![0.0; n];
    for &(d, v) in &cons.dirichlet {
        full[d] = v;
    }
    let (kff, rhs) = eliminate(k, f, &full, &map);
    let factor = match solver {
        LinearSolver::Direct => Some(SkylineCholesky::factor(&kff)?),
        LinearSolver::Cg(_) => None,
    };
    let solve = |b: &[f64]| -> Result<Vec<f64>> {
        match (&factor, solver) {
            (Some(ch), _) => Ok(ch.solve(b)),
            (None, LinearSolver::Cg(opts)) => {
                let mut x = vec![0.0; b.len()];
                pcg(&kff, b, &mut x, opts)?;
                Ok(x)
            }
            _ => unreachable!(),
        }
    };
    let u0 = solve(&rhs)?;
    let m = cons.lagrange.len();
    // Rows restricted to free dofs, targets shifted by the Dirichlet part.
    let mut rows = Vec::with_capacity(m);
    let mut targets = Vec::with_capacity(m);
    for (row, target) in &cons.lagrange {
        let mut r = vec![0.0; map.n_free];
        let mut t = *target;
        for &(i, c) in row {
            match map.free_index[i] {
                Some(kk) => r[kk] += c,
                None => t -= c * full[i],
            }
        }
        rows.push(r);
        targets.push(t);
    }
    let mut u = u0.clone();
    let mut multipliers = vec![0.0; m];
    // A row with no free entries is either already satisfied by the
    // Dirichlet data (inactive, multiplier 0) or inconsistent.
    let mut active = Vec::with_capacity(m);
    for a in 0..m {
        if rows[a].iter().all(|c| *c == 0.0) {
            if targets[a].abs() > 1e-12 * (1.0 + cons.lagrange[a].1.abs()) {
                return Err(Error::Solver(format!("constraint {a} contradicts the dirichlet data")));
            }
        } else {
            active.push(a);
        }
    }
    let ma = active.len();
    if ma > 0 {
        let zs: Vec<Vec<f64>> = active.iter().map(|&a| solve(&rows[a])).collect::<Result<_>>()?;
        let s = nalgebra::DMatrix::from_fn(ma, ma, |a, b| dot(&rows[active[a]], &zs[b]));
        let g = nalgebra::DVector::from_fn(ma, |a, _| targets[active[a]] - dot(&rows[active[a]], &u0));
        let eig = s.clone().symmetric_eigen();
        let top = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if eig.eigenvalues.iter().any(|v| v.abs() <= 1e-12 * top) {
            return Err(Error::Solver("singular constraint system".into()));
        }
        let lam = s.lu().solve(&g).ok_or_else(|| Error::Solver("singular constraint system".into()))?;
        for (b, z) in zs.iter().enumerate() {
            for (ui, zi) in u.iter_mut().zip(z) {
                *ui += lam[b] * zi;
            }
            multipliers[active[b]] = lam[b];
        }
    }
    map.scatter(&u, &mut full);
    let constraint_residual = cons
        .lagrange
        .iter()
        .map(|(row, t)| (row.iter().map(|&(i, c)| c * full[i]).sum::<f64>() - t).abs())
        .fold(0.0, f64::max);
    Ok(ConstrainedSolution { u: full, multipliers, constraint_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn linear_interpolant_is_recovered() {
        let n = 11;
        let k = laplacian(n);
        let mut cons = ConstraintSet::new();
        cons.fix(0, 0.0).fix(n - 1, 1.0);
        let sol = solve_constrained(&k, &vec![0.0; n], &cons, LinearSolver::Direct).unwrap();
        for (i, v) in sol.u.iter().enumerate() {
            assert!((v - i as f64 / 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn point_constraint_is_exact() {
        let n = 21;
        let k = laplacian(n);
        let mut cons = ConstraintSet::new();
        cons.fix(0, 0.0).fix(n - 1, 0.0).add_row(vec![(7, 1.0)], 0.0);
        let sol = solve_constrained(&k, &vec![1.0; n], &cons, LinearSolver::Direct).unwrap();
        assert!(sol.u[7].abs() < 1e-12);
        assert!(sol.constraint_residual < 1e-12);
        assert!(sol.multipliers[0] < 0.0);
    }

    #[test]
    fn inactive_constraint_has_zero_multiplier() {
        let n = 21;
        let k = laplacian(n);
        let mut cons = ConstraintSet::new();
        cons.fix(0, 0.0).fix(n - 1, 0.0).add_row(vec![(0, 1.0)], 0.0);
        let sol = solve_constrained(&k, &vec![1.0; n], &cons, LinearSolver::Direct).unwrap();
        assert!(sol.multipliers[0].abs() < 1e-12);
    }
}
