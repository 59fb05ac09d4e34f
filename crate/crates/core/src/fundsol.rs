//! Fundamental solutions of the plate operators `ℒ′` (membrane, 2x2) and
//! `ℒ₃` (bending, scalar fourth order) for a constant reduced stiffness.
//!
//! Fields are kept as finite sums `r^k (a(φ) + b(φ) ln r)` with `a`, `b`
//! stored as truncated Fourier series. Cartesian derivatives of such sums
//! stay in the same class, so every derivative needed by the Neumann
//! operators is evaluated exactly (up to the truncation of the series).
//!
//! For a generic stiffness the solutions come from the plane-wave integral
//! `E(y) = ∫_{|ω|=1} P(ω)⁻¹ F(ω·y) dω` with `F^{(2m)} = (ln|t|)'' / 4π²`.
//! Writing `ω·y = r cos(θ − φ)` turns the angular part into a convolution
//! with `ln|cos t|`, whose Fourier coefficients are known in closed form.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::elastic::{bending_coefficient, lambda_prime, ReducedStiffness};
use crate::error::{Error, Result};

/// Real `2π`-periodic function `c₀ + 2 Re Σ_{n≥1} c_n e^{inφ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularSeries {
    coeffs: Vec<Complex64>,
}

impl AngularSeries {
    pub fn zero() -> Self {
        Self { coeffs: vec![Complex64::new(0.0, 0.0)] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![Complex64::new(c, 0.0)] }
    }

    pub fn from_coefficients(coeffs: Vec<Complex64>) -> Self {
        let mut s = Self { coeffs };
        if s.coeffs.is_empty() {
            s.coeffs.push(Complex64::new(0.0, 0.0));
        }
        s.coeffs[0].im = 0.0;
        s
    }

    /// Coefficients `c_0 … c_{N/2−1}` of `N` uniform samples on `[0, 2π)`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let half = n.div_ceil(2);
        Self::from_coefficients(buf[..half].iter().map(|c| c / n as f64).collect())
    }

    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `c_n` for any integer `n`, using `c_{−n} = conj(c_n)`.
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let m = n.unsigned_abs() as usize;
        let c = self.coeffs.get(m).copied().unwrap_or_default();
        if n < 0 {
            c.conj()
        } else {
            c
        }
    }

    pub fn eval(&self, phi: f64) -> f64 {
        let step = Complex64::from_polar(1.0, phi);
        let mut e = step;
        let mut acc = 0.0;
        for c in &self.coeffs[1..] {
            acc += (c * e).re;
            e *= step;
        }
        self.coeffs[0].re + 2.0 * acc
    }

    pub fn derivative(&self) -> Self {
        Self::from_coefficients(self.coeffs.iter().enumerate().map(|(n, c)| c * Complex64::new(0.0, n as f64)).collect())
    }

    pub fn mul_cos(&self) -> Self {
        let m = self.coeffs.len() as i64;
        Self::from_coefficients((0..=m).map(|n| 0.5 * (self.coefficient(n - 1) + self.coefficient(n + 1))).collect())
    }

    pub fn mul_sin(&self) -> Self {
        let m = self.coeffs.len() as i64;
        let half_i = Complex64::new(0.0, -0.5);
        Self::from_coefficients((0..=m).map(|n| half_i * (self.coefficient(n - 1) - self.coefficient(n + 1))).collect())
    }

    pub fn add(&self, o: &Self) -> Self {
        let n = self.coeffs.len().max(o.coeffs.len());
        Self::from_coefficients((0..n as i64).map(|k| self.coefficient(k) + o.coefficient(k)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coefficients(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Drops trailing coefficients below `tol` times the largest one.
    pub fn trimmed(mut self, tol: f64) -> Self {
        let max = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(|c| c.norm() <= tol * max) {
            self.coeffs.pop();
        }
        self
    }

    /// `(1/2π) ∫ f dφ`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }
}

/// `r^k (a(φ) + b(φ) ln r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolarField {
    pub k: i32,
    pub a: AngularSeries,
    pub b: AngularSeries,
}

impl PolarField {
    pub fn zero() -> Self {
        Self { k: 0, a: AngularSeries::zero(), b: AngularSeries::zero() }
    }

    pub fn eval(&self, y: [f64; 2]) -> f64 {
        let r = y[0].hypot(y[1]);
        let phi = y[1].atan2(y[0]);
        r.powi(self.k) * (self.a.eval(phi) + self.b.eval(phi) * r.ln())
    }

    /// `∂/∂y₁` (`dir = 0`) or `∂/∂y₂` (`dir = 1`).
    pub fn partial(&self, dir: usize) -> Self {
        let k = self.k as f64;
        let (da, db) = (self.a.derivative(), self.b.derivative());
        let ka_b = self.a.scale(k).add(&self.b);
        let kb = self.b.scale(k);
        let (a, b) = if dir == 0 {
            (ka_b.mul_cos().add(&da.mul_sin().scale(-1.0)), kb.mul_cos().add(&db.mul_sin().scale(-1.0)))
        } else {
            (ka_b.mul_sin().add(&da.mul_cos()), kb.mul_sin().add(&db.mul_cos()))
        };
        Self { k: self.k - 1, a, b }
    }

    pub fn add(&self, o: &Self) -> Result<Self> {
        if self.k != o.k {
            return Err(Error::InvalidInput(format!("cannot add fields of degree {} and {}", self.k, o.k)));
        }
        Ok(Self { k: self.k, a: self.a.add(&o.a), b: self.b.add(&o.b) })
    }
}

/// All partial derivatives `∂₁^i ∂₂^j` with `i + j ≤ order`.
#[derive(Clone, Debug)]
pub struct DerivativeTable {
    order: usize,
    fields: Vec<PolarField>,
}

impl DerivativeTable {
    pub fn new(f: &PolarField, order: usize) -> Self {
        let mut fields = Vec::new();
        for total in 0..=order {
            for j in 0..=total {
                let i = total - j;
                let d = if total == 0 {
                    f.clone()
                } else if i > 0 {
                    Self::index_in(&fields, i - 1, j).partial(0)
                } else {
                    Self::index_in(&fields, i, j - 1).partial(1)
                };
                fields.push(d);
            }
        }
        Self { order, fields }
    }

    fn slot(i: usize, j: usize) -> usize {
        let t = i + j;
        t * (t + 1) / 2 + j
    }

    fn index_in(fields: &[PolarField], i: usize, j: usize) -> &PolarField {
        &fields[Self::slot(i, j)]
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> &PolarField {
        assert!(i + j <= self.order, "derivative order {} exceeds table order {}", i + j, self.order);
        &self.fields[Self::slot(i, j)]
    }

    pub fn eval(&self, i: usize, j: usize, y: [f64; 2]) -> f64 {
        self.get(i, j).eval(y)
    }
}

/// `ln|cos t| = Σ ℓ_n e^{int}`: `ℓ₀ = −ln 2`, `ℓ_{±2k} = −(−1)^k / 2k`.
fn log_cos_coefficient(n: i64) -> f64 {
    if n == 0 {
        return -std::f64::consts::LN_2;
    }
    if n % 2 != 0 {
        return 0.0;
    }
    let k = n.abs() / 2;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    -sign / (2 * k) as f64
}

/// `M(ω) = 𝒟′(ω)ᵀA⁰𝒟′(ω)`, the symbol of `−ℒ′`.
pub fn membrane_symbol_at(a0: &Mat<f64>, w: [f64; 2]) -> [[f64; 2]; 2] {
    let s = FRAC_1_SQRT_2;
    let d = [[w[0], 0.0], [0.0, w[1]], [s * w[1], s * w[0]]];
    std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let mut acc = 0.0;
            for m in 0..3 {
                for n in 0..3 {
                    acc += d[m][i] * a0[(m, n)] * d[n][j];
                }
            }
            acc
        })
    })
}

/// `P(ω) = (1/6)𝒟₃(ω)ᵀA⁰𝒟₃(ω)`, the symbol of `ℒ₃`.
pub fn bending_symbol_at(a0: &Mat<f64>, w: [f64; 2]) -> f64 {
    let s = FRAC_1_SQRT_2;
    let d = [s * w[0] * w[0], s * w[1] * w[1], w[0] * w[1]];
    let mut acc = 0.0;
    for m in 0..3 {
        for n in 0..3 {
            acc += d[m] * a0[(m, n)] * d[n];
        }
    }
    acc / 6.0
}

/// `(λ′, μ)` if `A⁰` has the isotropic plane-stress form.
pub fn isotropic_parameters(a0: &Mat<f64>) -> Option<(f64, f64)> {
    let scale = a0.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mu = 0.5 * a0[(2, 2)];
    let lp = a0[(0, 1)];
    let close = |a: f64, b: f64| (a - b).abs() <= tol;
    let ok = close(a0[(0, 0)], lp + 2.0 * mu)
        && close(a0[(1, 1)], lp + 2.0 * mu)
        && close(a0[(1, 0)], lp)
        && [(0, 2), (2, 0), (1, 2), (2, 1)].iter().all(|&(i, j)| close(a0[(i, j)], 0.0));
    ok.then_some((lp, mu))
}

/// Closed-form isotropic fundamentals from the 3D Lamé constants.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IsotropicFundamentals {
    pub phi_prime: [[f64; 2]; 2],
    pub phi3: f64,
    pub grad_phi3: [f64; 2],
}

pub fn eval_isotropic_fundamentals(lambda: f64, mu: f64, y: [f64; 2]) -> Result<IsotropicFundamentals> {
    if !(mu > 0.0) || !(lambda + mu > 0.0) {
        return Err(Error::InvalidMaterial(format!("Lamé constants ({lambda}, {mu}) are not admissible")));
    }
    let r2 = y[0] * y[0] + y[1] * y[1];
    if r2 == 0.0 {
        return Err(Error::InvalidInput("fundamental solutions are singular at the origin".into()));
    }
    let lp = lambda_prime(&lambda, &mu);
    let c = (lp + 3.0 * mu) / (4.0 * PI * mu * (lp + 2.0 * mu));
    let beta = (lp + mu) / (lp + 3.0 * mu);
    let ln_r = 0.5 * r2.ln();
    let phi_prime = std::array::from_fn(|i| {
        std::array::from_fn(|j| c * ((if i == j { -ln_r } else { 0.0 }) + beta * y[i] * y[j] / r2))
    });
    let b = 1.0 / (8.0 * PI * bending_coefficient(&lambda, &mu));
    Ok(IsotropicFundamentals {
        phi_prime,
        phi3: b * r2 * ln_r,
        grad_phi3: [b * y[0] * (2.0 * ln_r + 1.0), b * y[1] * (2.0 * ln_r + 1.0)],
    })
}

/// Fundamental solutions for one reduced stiffness, with derivative tables.
///
/// `Φ′ = Ψ′ ln r + ψ′(φ)` and `Φ₃ = (yᵀSy) ln r + r²ψ₃(φ)`; for isotropic
/// stiffness `S = −½Ψ₃ I`.
#[derive(Clone, Debug)]
pub struct Fundamentals {
    pub a0: Mat<f64>,
    pub closed_form: bool,
    /// `Ψ′`.
    pub membrane_log: [[f64; 2]; 2],
    /// `S`.
    pub bending_log: [[f64; 2]; 2],
    /// Constant added to `ψ′` by [`Fundamentals::normalize`].
    pub normalization_offset: [[f64; 2]; 2],
    membrane: [[DerivativeTable; 2]; 2],
    bending: DerivativeTable,
}

/// Derivative orders kept for `Φ′` and `Φ₃`.
const MEMBRANE_ORDER: usize = 4;
const BENDING_ORDER: usize = 5;

fn angular_quadratic(s: [[f64; 2]; 2]) -> AngularSeries {
    let one = AngularSeries::constant(1.0);
    let cc = one.mul_cos().mul_cos();
    let ss = one.mul_sin().mul_sin();
    let sc = one.mul_sin().mul_cos();
    cc.scale(s[0][0]).add(&ss.scale(s[1][1])).add(&sc.scale(s[0][1] + s[1][0]))
}

impl Fundamentals {
    fn from_parts(a0: Mat<f64>, closed_form: bool, membrane_log: [[f64; 2]; 2], psi: [[AngularSeries; 2]; 2], bending_log: [[f64; 2]; 2], psi3: AngularSeries) -> Self {
        let membrane = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let f = PolarField { k: 0, a: psi[i][j].clone(), b: AngularSeries::constant(membrane_log[i][j]) };
                DerivativeTable::new(&f, MEMBRANE_ORDER)
            })
        });
        let phi3 = PolarField { k: 2, a: psi3, b: angular_quadratic(bending_log) };
        Self {
            a0,
            closed_form,
            membrane_log,
            bending_log,
            normalization_offset: [[0.0; 2]; 2],
            membrane,
            bending: DerivativeTable::new(&phi3, BENDING_ORDER),
        }
    }

    /// Closed forms for isotropic `A⁰` with plane-stress constants `λ′`, `μ`.
    pub fn isotropic(lp: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && lp + mu > 0.0) {
            return Err(Error::InvalidMaterial(format!("plane constants ({lp}, {mu}) are not admissible")));
        }
        let a0 = Mat::from_rows(vec![
            vec![lp + 2.0 * mu, lp, 0.0],
            vec![lp, lp + 2.0 * mu, 0.0],
            vec![0.0, 0.0, 2.0 * mu],
        ]);
        let c = (lp + 3.0 * mu) / (4.0 * PI * mu * (lp + 2.0 * mu));
        let beta = (lp + mu) / (lp + 3.0 * mu);
        let one = AngularSeries::constant(1.0);
        let cc = one.mul_cos().mul_cos().scale(c * beta);
        let ss = one.mul_sin().mul_sin().scale(c * beta);
        let sc = one.mul_sin().mul_cos().scale(c * beta);
        let psi = [[cc, sc.clone()], [sc, ss]];
        let d = (lp + 2.0 * mu) / 12.0;
        let b = 1.0 / (8.0 * PI * d);
        Ok(Self::from_parts(a0, true, [[-c, 0.0], [0.0, -c]], psi, [[b, 0.0], [0.0, b]], AngularSeries::zero()))
    }

    /// Plane-wave construction from `nodes` uniform angular samples.
    pub fn plane_wave(a0: &ReducedStiffness<f64>, nodes: usize) -> Result<Self> {
        if nodes < 16 || nodes % 2 != 0 {
            return Err(Error::InvalidInput(format!("angular node count must be even and at least 16, got {nodes}")));
        }
        let m = a0.matrix().clone();
        if !m.is_positive_definite() {
            return Err(Error::InvalidMaterial("reduced stiffness is not positive definite".into()));
        }
        let thetas: Vec<f64> = (0..nodes).map(|j| 2.0 * PI * j as f64 / nodes as f64).collect();
        let mut minv = [[vec![0.0; nodes], vec![0.0; nodes]], [vec![0.0; nodes], vec![0.0; nodes]]];
        let mut p = vec![0.0; nodes];
        for (j, &t) in thetas.iter().enumerate() {
            let w = [t.cos(), t.sin()];
            let s = membrane_symbol_at(&m, w);
            let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
            minv[0][0][j] = s[1][1] / det;
            minv[1][1][j] = s[0][0] / det;
            minv[0][1][j] = -s[0][1] / det;
            minv[1][0][j] = -s[1][0] / det;
            p[j] = 1.0 / bending_symbol_at(&m, w);
        }
        let tol = 1e-17;
        // Φ′ = −(1/4π²) ∫ M(θ)⁻¹ (ln r + ℓ(θ − φ)) dθ.
        let mut membrane_log = [[0.0; 2]; 2];
        let psi: [[AngularSeries; 2]; 2] = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let f = AngularSeries::from_samples(&minv[i][j]);
                membrane_log[i][j] = -f.mean() / (2.0 * PI);
                let coeffs = (0..=f.n_max() as i64).map(|n| f.coefficient(n) * (-log_cos_coefficient(n) / (2.0 * PI))).collect();
                AngularSeries::from_coefficients(coeffs).trimmed(tol)
            })
        });
        // Φ₃ = (1/8π²) ∫ p(θ) r² cos²(θ − φ)(ln r + ℓ(θ − φ)) dθ.
        let mut s = [[0.0; 2]; 2];
        for (j, &t) in thetas.iter().enumerate() {
            let w = [t.cos(), t.sin()];
            for a in 0..2 {
                for b in 0..2 {
                    s[a][b] += p[j] * w[a] * w[b] * (2.0 * PI / nodes as f64) / (8.0 * PI * PI);
                }
            }
        }
        let pf = AngularSeries::from_samples(&p);
        let q = |n: i64| 0.5 * log_cos_coefficient(n) + 0.25 * (log_cos_coefficient(n - 2) + log_cos_coefficient(n + 2));
        let psi3 = AngularSeries::from_coefficients((0..=pf.n_max() as i64).map(|n| pf.coefficient(n) * (q(n) / (4.0 * PI))).collect()).trimmed(tol);
        Ok(Self::from_parts(m, false, membrane_log, psi, s, psi3))
    }

    /// `Φ′(y)`.
    pub fn phi_prime(&self, y: [f64; 2]) -> [[f64; 2]; 2] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.membrane[i][j].eval(0, 0, y)))
    }

    /// `∂₁^a ∂₂^b Φ′_ij(y)`.
    pub fn phi_prime_derivative(&self, i: usize, j: usize, a: usize, b: usize, y: [f64; 2]) -> f64 {
        self.membrane[i][j].eval(a, b, y)
    }

    pub fn phi3(&self, y: [f64; 2]) -> f64 {
        self.bending.eval(0, 0, y)
    }

    /// `∂₁^a ∂₂^b Φ₃(y)`.
    pub fn phi3_derivative(&self, a: usize, b: usize, y: [f64; 2]) -> f64 {
        self.bending.eval(a, b, y)
    }

    pub fn membrane_order(&self) -> usize {
        MEMBRANE_ORDER
    }

    pub fn bending_order(&self) -> usize {
        BENDING_ORDER
    }

    /// `ψ′(φ)`, the angular part of `Φ′` including any normalisation shift.
    pub fn psi_prime(&self, phi: f64) -> [[f64; 2]; 2] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.membrane[i][j].get(0, 0).a.eval(phi)))
    }

    /// `ψ₃(φ)`.
    pub fn psi3(&self, phi: f64) -> f64 {
        self.bending.get(0, 0).a.eval(phi)
    }

    /// Adds the constant matrix `c` to `ψ′`.
    pub fn shift_membrane(&mut self, c: [[f64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                let mut f = self.membrane[i][j].get(0, 0).clone();
                f.a = f.a.add(&AngularSeries::constant(c[i][j]));
                self.membrane[i][j] = DerivativeTable::new(&f, MEMBRANE_ORDER);
                self.normalization_offset[i][j] += c[i][j];
            }
        }
    }

    /// Chooses the constant in `ψ′` so that `∮ ψ′ᵀ 𝒩′Φ′ ds = 0`, which is
    /// the same as `∮ Φ′ᵀ𝒩′Φ′ ds = 0` on the unit circle. Returns the
    /// integral before the shift.
    pub fn normalize(&mut self, nodes: usize) -> [[f64; 2]; 2] {
        let j = self.membrane_normalization_integral(1.0, nodes, 0.0);
        // ψ′ + C changes the integral by Cᵀ∮𝒩′Φ′ = −Cᵀ.
        self.shift_membrane([[j[0][0], j[1][0]], [j[0][1], j[1][1]]]);
        j
    }

    /// `𝒩′Φ′` at a point with unit normal `n`.
    pub fn membrane_traction(&self, y: [f64; 2], n: [f64; 2]) -> [[f64; 2]; 2] {
        let s = FRAC_1_SQRT_2;
        let mut out = [[0.0; 2]; 2];
        for col in 0..2 {
            let d1 = |i: usize| self.membrane[i][col].eval(1, 0, y);
            let d2 = |i: usize| self.membrane[i][col].eval(0, 1, y);
            let strain = [d1(0), d2(1), s * (d2(0) + d1(1))];
            let mut stress = [0.0; 3];
            for (a, st) in stress.iter_mut().enumerate() {
                *st = (0..3).map(|b| self.a0[(a, b)] * strain[b]).sum();
            }
            out[0][col] = n[0] * stress[0] + s * n[1] * stress[2];
            out[1][col] = n[1] * stress[1] + s * n[0] * stress[2];
        }
        out
    }

    /// `(𝒩₀, 𝒩₁, 𝒩₂)` applied to `∂₁^a ∂₂^b Φ₃` at a point with unit normal `n`.
    pub fn bending_traction(&self, a: usize, b: usize, y: [f64; 2], n: [f64; 2]) -> [f64; 3] {
        let s = FRAC_1_SQRT_2;
        let d = |i: usize, j: usize| self.bending.eval(a + i, b + j, y);
        let a3 = |p: usize, q: usize| self.a0[(p, q)] / 6.0;
        // σ = 𝒜₃𝒟₃Φ and its first derivatives.
        let sigma_of = |di: usize, dj: usize| -> [f64; 3] {
            let e = [s * d(2 + di, dj), s * d(di, 2 + dj), d(1 + di, 1 + dj)];
            std::array::from_fn(|p| (0..3).map(|q| a3(p, q) * e[q]).sum())
        };
        let sig = sigma_of(0, 0);
        let sig1 = sigma_of(1, 0);
        let sig2 = sigma_of(0, 1);
        // 𝒟′(−∇)ᵀσ.
        let div = [-(sig1[0] + s * sig2[2]), -(sig2[1] + s * sig1[2])];
        let n0 = s * (n[0] * div[0] + n[1] * div[1]);
        let n1 = s * (n[0] * sig[0] + s * n[1] * sig[2]);
        let n2 = s * (n[1] * sig[1] + s * n[0] * sig[2]);
        [n0, n1, n2]
    }

    fn contour(radius: f64, nodes: usize, start: f64) -> impl Iterator<Item = ([f64; 2], [f64; 2], f64)> {
        let ds = 2.0 * PI * radius / nodes as f64;
        (0..nodes).map(move |k| {
            let t = start + 2.0 * PI * k as f64 / nodes as f64;
            let n = [t.cos(), t.sin()];
            ([radius * n[0], radius * n[1]], n, ds)
        })
    }

    /// `∮ ψ′ᵀ 𝒩′Φ′ ds` on the circle of the given radius.
    pub fn membrane_normalization_integral(&self, radius: f64, nodes: usize, start: f64) -> [[f64; 2]; 2] {
        let mut acc = [[0.0; 2]; 2];
        for (y, n, ds) in Self::contour(radius, nodes, start) {
            let psi = self.psi_prime(y[1].atan2(y[0]));
            let t = self.membrane_traction(y, n);
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += ds * (psi[0][i] * t[0][j] + psi[1][i] * t[1][j]);
                }
            }
        }
        acc
    }

    /// Writes `phi, psi11, psi12, psi22, psi3` on a uniform angular grid.
    pub fn write_angular_csv(&self, samples: usize, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phi", "psi11", "psi12", "psi22", "psi3"])?;
        for k in 0..samples {
            let phi = 2.0 * PI * k as f64 / samples as f64;
            let p = self.psi_prime(phi);
            w.serialize((phi, p[0][0], p[0][1], p[1][1], self.psi3(phi)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One checked relation: measured values against the expected ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub value: Vec<f64>,
    pub expected: Vec<f64>,
    pub defect: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContourReport {
    pub radius: f64,
    pub start_angle: f64,
    pub nodes: usize,
    pub checks: Vec<IdentityCheck>,
    pub max_defect: f64,
}

impl ContourReport {
    pub fn check(&self, name: &str) -> Option<&IdentityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self, tol: f64) -> Vec<&IdentityCheck> {
        self.checks.iter().filter(|c| c.defect > tol).collect()
    }
}

/// Evaluates the defining contour identities of the fundamental solutions on
/// a circle, with `(f, g)_γ = ∮ f·g ds` and `(1, ∇)v = (v, ∂₁v, ∂₂v)`:
///
/// * `bending-unit-load`: `−(1, 𝒩₀Φ₃) = 1`
/// * `bending-linear`: `−((1,∇)y_k, 𝒩₃Φ₃) = 0`
/// * `bending-gradient-unit`: `−(1, 𝒩₀Φ₃^i) = 0`
/// * `bending-gradient-linear`: `((1,∇)y_k, 𝒩₃Φ₃^i) = δ_ik`
/// * `membrane-unit-load`: `−∮𝒩′Φ′ = I₂`
/// * `membrane-normalization`: `∮ψ′ᵀ𝒩′Φ′ = 0`
pub fn verify_contour_identities(f: &Fundamentals, radius: f64, nodes: usize, start: f64) -> Result<ContourReport> {
    if !(radius > 0.0) || nodes < 8 {
        return Err(Error::InvalidInput(format!("contour needs radius > 0 and at least 8 nodes, got {radius}, {nodes}")));
    }
    let mut unit = 0.0;
    let mut linear = [0.0; 2];
    let mut grad_unit = [0.0; 2];
    let mut grad_linear = [[0.0; 2]; 2];
    let mut membrane = [[0.0; 2]; 2];
    for (y, n, ds) in Fundamentals::contour(radius, nodes, start) {
        let t = f.bending_traction(0, 0, y, n);
        unit -= ds * t[0];
        for k in 0..2 {
            linear[k] -= ds * (y[k] * t[0] + t[1 + k]);
        }
        for i in 0..2 {
            let ti = if i == 0 { f.bending_traction(1, 0, y, n) } else { f.bending_traction(0, 1, y, n) };
            grad_unit[i] -= ds * ti[0];
            for k in 0..2 {
                grad_linear[i][k] += ds * (y[k] * ti[0] + ti[1 + k]);
            }
        }
        let tm = f.membrane_traction(y, n);
        for i in 0..2 {
            for j in 0..2 {
                membrane[i][j] -= ds * tm[i][j];
            }
        }
    }
    let norm_int = f.membrane_normalization_integral(radius, nodes, start);
    let flat = |m: [[f64; 2]; 2]| vec![m[0][0], m[0][1], m[1][0], m[1][1]];
    let mk = |name: &str, value: Vec<f64>, expected: Vec<f64>| {
        let defect = value.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        IdentityCheck { name: name.into(), value, expected, defect }
    };
    let checks = vec![
        mk("bending-unit-load", vec![unit], vec![1.0]),
        mk("bending-linear", linear.to_vec(), vec![0.0; 2]),
        mk("bending-gradient-unit", grad_unit.to_vec(), vec![0.0; 2]),
        mk("bending-gradient-linear", flat(grad_linear), vec![1.0, 0.0, 0.0, 1.0]),
        mk("membrane-unit-load", flat(membrane), vec![1.0, 0.0, 0.0, 1.0]),
        mk("membrane-normalization", flat(norm_int), vec![0.0; 4]),
    ];
    let max_defect = checks.iter().map(|c| c.defect).fold(0.0, f64::max);
    Ok(ContourReport { radius, start_angle: start, nodes, checks, max_defect })
}

/// Builds and normalises the fundamental solutions, then validates them on
/// the unit circle. Isotropic stiffness uses the closed forms.
pub fn construct_fundamental(a0: &ReducedStiffness<f64>, nodes: usize) -> Result<Fundamentals> {
    let mut f = match isotropic_parameters(a0.matrix()) {
        Some((lp, mu)) => Fundamentals::isotropic(lp, mu)?,
        None => Fundamentals::plane_wave(a0, nodes)?,
    };
    f.normalize(512);
    let report = verify_contour_identities(&f, 1.0, 512, 0.0)?;
    let bad = report.failures(1e-6);
    if !bad.is_empty() {
        let names: Vec<String> = bad.iter().map(|c| format!("{} (defect {:.2e})", c.name, c.defect)).collect();
        return Err(Error::Construction(format!("fundamental solution fails contour identities: {}", names.join(", "))));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::StiffnessMatrix;

    fn orthotropic() -> ReducedStiffness<f64> {
        ReducedStiffness::from_matrix(Mat::from_rows(vec![vec![4.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 2.0]])).unwrap()
    }

    #[test]
    fn series_calculus() {
        let s = AngularSeries::constant(1.0).mul_cos().mul_sin();
        for &t in &[0.1, 1.3, 4.0] {
            assert!((s.eval(t) - t.cos() * t.sin()).abs() < 1e-15);
            assert!((s.derivative().eval(t) - (2.0 * t).cos()).abs() < 1e-14);
        }
        let samples: Vec<f64> = (0..64).map(|j| (2.0 * PI * j as f64 / 64.0).cos().exp()).collect();
        let f = AngularSeries::from_samples(&samples);
        assert!((f.eval(0.3) - 0.3f64.cos().exp()).abs() < 1e-13);
    }

    #[test]
    fn polar_partial_matches_difference() {
        let f = PolarField { k: 2, a: AngularSeries::constant(1.0).mul_cos(), b: AngularSeries::constant(0.5).mul_sin().mul_sin() };
        let y = [0.7, -0.4];
        let e = 1e-5;
        for dir in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[dir] += e;
            ym[dir] -= e;
            let fd = (f.eval(yp) - f.eval(ym)) / (2.0 * e);
            assert!((fd - f.partial(dir).eval(y)).abs() < 1e-8);
        }
    }

    #[test]
    fn isotropic_printed_values() {
        let v = eval_isotropic_fundamentals(1.0, 1.0, [1.0, 0.0]).unwrap();
        assert!((v.phi_prime[0][0] - 5.0 / (32.0 * PI)).abs() < 1e-15);
        assert_eq!(v.phi_prime[0][1], 0.0);
        assert_eq!(v.phi3, 0.0);
        let v = eval_isotropic_fundamentals(1.0, 1.0, [2.0, 0.0]).unwrap();
        assert!((v.phi3 - 9.0 / (16.0 * PI) * 4.0 * 2f64.ln()).abs() < 1e-14);
        assert!(eval_isotropic_fundamentals(1.0, 1.0, [0.0, 0.0]).is_err());
    }

    #[test]
    fn isotropic_closed_form_identities() {
        let a0 = StiffnessMatrix::isotropic(1.0, 1.0).unwrap().reduced();
        let f = construct_fundamental(&a0, 1024).unwrap();
        assert!(f.closed_form);
        for r in [0.5, 1.0, 2.0] {
            let rep = verify_contour_identities(&f, r, 512, 0.0).unwrap();
            assert!(rep.max_defect < 1e-10, "{rep:?}");
        }
    }

    #[test]
    fn plane_wave_matches_closed_form() {
        let a0 = StiffnessMatrix::isotropic(1.0, 1.0).unwrap().reduced();
        let mut pw = Fundamentals::plane_wave(&a0, 1024).unwrap();
        let mut cf = Fundamentals::isotropic(2.0 / 3.0, 1.0).unwrap();
        pw.normalize(512);
        cf.normalize(512);
        for k in 0..16 {
            let t = 0.37 + k as f64 * 0.4;
            let y = [t.cos(), t.sin()];
            let (a, b) = (pw.phi_prime(y), cf.phi_prime(y));
            for i in 0..2 {
                for j in 0..2 {
                    assert!((a[i][j] - b[i][j]).abs() < 1e-10, "{i}{j}: {} vs {}", a[i][j], b[i][j]);
                }
            }
            // The two bending solutions may differ by a quadratic polynomial.
            for (p, q) in [(3, 0), (2, 1), (0, 3)] {
                let d = (pw.phi3_derivative(p, q, y) - cf.phi3_derivative(p, q, y)).abs();
                assert!(d < 1e-10, "{p}{q}: {d}");
            }
        }
    }

    #[test]
    fn orthotropic_identities_and_equation() {
        let f = construct_fundamental(&orthotropic(), 1024).unwrap();
        assert!(!f.closed_form);
        for r in [0.5, 1.0, 2.0] {
            let rep = verify_contour_identities(&f, r, 512, 0.3).unwrap();
            assert!(rep.max_defect < 1e-8, "{rep:?}");
            let y = [r * 0.6, r * 0.8];
            // ℒ₃Φ₃ = 0 away from the origin.
            let p = |a: usize, b: usize| f.phi3_derivative(a, b, y);
            let c = crate::kirchhoff::operator_coefficients(&orthotropic());
            let l3: f64 = (0..5).map(|k| c.bending[k] * p(4 - k, k)).sum();
            assert!(l3.abs() < 1e-9, "{l3}");
        }
    }
}
