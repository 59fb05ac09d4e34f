//! Stiffness matrices in Mandel-Voigt notation and the differential
//! operators built from them.
//!
//! Strain column: `ε = (ε11, ε22, √2ε12, √2ε13, √2ε23, ε33)`. With this
//! ordering the in-plane block is `{0,1,2}` and the transverse block is
//! `{3,4,5}`, and the energy density is `εᵀAε`.

use serde::{Deserialize, Serialize};

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::poly::{Poly, PolyVec, ZETA};
use crate::scalar::Scalar;

/// Indices of the in-plane strain components.
pub const IN_PLANE: [usize; 3] = [0, 1, 2];
/// Indices of the transverse strain components.
pub const TRANSVERSE: [usize; 3] = [3, 4, 5];

#[derive(Clone, Debug, PartialEq)]
pub struct StiffnessMatrix<T> {
    a: Mat<T>,
}

impl<T: Scalar> StiffnessMatrix<T> {
    pub fn new(a: Mat<T>) -> Result<Self> {
        if a.rows() != 6 || a.cols() != 6 {
            return Err(Error::InvalidMaterial(format!("expected 6x6, got {}x{}", a.rows(), a.cols())));
        }
        if !a.is_symmetric() {
            return Err(Error::InvalidMaterial("stiffness matrix is not symmetric".into()));
        }
        if !a.is_positive_definite() {
            return Err(Error::InvalidMaterial("stiffness matrix is not positive definite".into()));
        }
        Ok(Self { a })
    }

    /// Isotropic material with Lamé constants `λ ≥ 0`, `μ > 0`.
    pub fn isotropic(lambda: T, mu: T) -> Result<Self> {
        if lambda < T::zero() || mu <= T::zero() {
            return Err(Error::InvalidMaterial(format!(
                "isotropic material needs lambda >= 0 and mu > 0 (got {:?}, {:?})",
                lambda, mu
            )));
        }
        let two_mu = T::from_i64(2) * mu;
        let diag = lambda.clone() + two_mu.clone();
        let a = Mat::from_fn(6, 6, |i, j| {
            let normal = |k: usize| k == 0 || k == 1 || k == 5;
            if i == j {
                if normal(i) {
                    diag.clone()
                } else {
                    two_mu.clone()
                }
            } else if normal(i) && normal(j) {
                lambda.clone()
            } else {
                T::zero()
            }
        });
        Ok(Self { a })
    }

    /// Builds the matrix from its 21 upper-triangular entries, row-major.
    pub fn from_upper_triangle(entries: &[T]) -> Result<Self> {
        if entries.len() != 21 {
            return Err(Error::InvalidMaterial(format!(
                "expected 21 upper-triangular entries, got {}",
                entries.len()
            )));
        }
        let mut a = Mat::zeros(6, 6);
        let mut k = 0;
        for i in 0..6 {
            for j in i..6 {
                a[(i, j)] = entries[k].clone();
                a[(j, i)] = entries[k].clone();
                k += 1;
            }
        }
        Self::new(a)
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.a
    }

    pub fn upper_triangle(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(21);
        for i in 0..6 {
            for j in i..6 {
                v.push(self.a[(i, j)].clone());
            }
        }
        v
    }

    pub fn block_yy(&self) -> Mat<T> {
        self.a.block(0, 0, 3, 3)
    }

    pub fn block_yz(&self) -> Mat<T> {
        self.a.block(0, 3, 3, 3)
    }

    pub fn block_zy(&self) -> Mat<T> {
        self.a.block(3, 0, 3, 3)
    }

    pub fn block_zz(&self) -> Mat<T> {
        self.a.block(3, 3, 3, 3)
    }

    /// Schur complement `A⁰ = A_yy - A_yz A_zz⁻¹ A_zy`: the in-plane stiffness
    /// once the transverse stresses are relaxed to zero.
    pub fn reduced(&self) -> ReducedStiffness<T> {
        let zz_inv = self.block_zz().inverse().expect("A_zz of a positive definite matrix is invertible");
        let a0 = self.block_yy().sub(&self.block_yz().mul(&zz_inv).mul(&self.block_zy()));
        ReducedStiffness { a0 }
    }

    pub fn to_f64(&self) -> StiffnessMatrix<f64> {
        StiffnessMatrix { a: self.a.to_f64() }
    }
}

impl StiffnessMatrix<f64> {
    /// The exact binary value of every entry as an element of the exact field.
    pub fn to_exact(&self) -> StiffnessMatrix<crate::scalar::Surd> {
        StiffnessMatrix {
            a: self.a.map(|v| crate::scalar::Surd::from_f64(*v).expect("finite stiffness entry")),
        }
    }

    /// Recovers `(λ, μ)` when the matrix has the isotropic pattern.
    pub fn isotropic_constants(&self, tol: f64) -> Option<(f64, f64)> {
        let lambda = self.a[(0, 1)];
        let mu = self.a[(3, 3)] / 2.0;
        let iso = StiffnessMatrix::isotropic(lambda.max(0.0), mu).ok()?;
        (self.a.max_abs_diff(&iso.a) <= tol * self.a.frobenius()).then_some((lambda, mu))
    }
}

/// The reduced 3x3 in-plane stiffness `A⁰`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedStiffness<T> {
    a0: Mat<T>,
}

impl<T: Scalar> ReducedStiffness<T> {
    pub fn from_matrix(a0: Mat<T>) -> Result<Self> {
        if a0.rows() != 3 || a0.cols() != 3 || !a0.is_symmetric() || !a0.is_positive_definite() {
            return Err(Error::InvalidMaterial("reduced stiffness must be 3x3 symmetric positive definite".into()));
        }
        Ok(Self { a0 })
    }

    pub fn matrix(&self) -> &Mat<T> {
        &self.a0
    }

    /// `diag{A⁰, A⁰/6}` acting on `(𝒟′w′, 𝒟3w3)`.
    pub fn block_operator(&self) -> Mat<T> {
        let sixth = T::from_ratio(1, 6);
        Mat::from_fn(6, 6, |i, j| match (i < 3, j < 3) {
            (true, true) => self.a0[(i, j)].clone(),
            (false, false) => self.a0[(i - 3, j - 3)].clone() * sixth.clone(),
            _ => T::zero(),
        })
    }

    /// Symbol of the membrane operator `𝒟′(-∇)ᵀA⁰𝒟′(∇)` as a 2x2 array of
    /// polynomials in `(ξ1, ξ2)` where `ξk` stands for `∂k`.
    pub fn membrane_symbol(&self) -> [[Poly<T>; 2]; 2] {
        let d = in_plane_strain_symbol::<T>();
        let mut out: [[Poly<T>; 2]; 2] = Default::default();
        for (i, row) in out.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let mut acc = Poly::zero();
                for a in 0..3 {
                    for b in 0..3 {
                        if self.a0[(a, b)].is_zero() {
                            continue;
                        }
                        acc.add_assign(&d[a][i].mul(&d[b][j]).scale(&self.a0[(a, b)]));
                    }
                }
                *entry = acc.neg();
            }
        }
        out
    }

    /// Symbol of the bending operator `(1/6)𝒟3(∇)ᵀA⁰𝒟3(∇)`.
    pub fn bending_symbol(&self) -> Poly<T> {
        let d3 = bending_strain_symbol::<T>();
        let mut acc = Poly::zero();
        for a in 0..3 {
            for b in 0..3 {
                acc.add_assign(&d3[a].mul(&d3[b]).scale(&self.a0[(a, b)]));
            }
        }
        acc.scale(&T::from_ratio(1, 6))
    }

    pub fn to_f64(&self) -> ReducedStiffness<f64> {
        ReducedStiffness { a0: self.a0.to_f64() }
    }
}

/// `𝒟′(ξ)`: 3x2, rows `(ξ1, 0)`, `(0, ξ2)`, `(ξ2, ξ1)/√2`.
pub fn in_plane_strain_symbol<T: Scalar>() -> [[Poly<T>; 2]; 3] {
    let s = T::frac_1_sqrt_2();
    [
        [Poly::var(0), Poly::zero()],
        [Poly::zero(), Poly::var(1)],
        [Poly::var(1).scale(&s), Poly::var(0).scale(&s)],
    ]
}

/// `𝒟3(ξ) = (ξ1²/√2, ξ2²/√2, ξ1ξ2)`.
pub fn bending_strain_symbol<T: Scalar>() -> [Poly<T>; 3] {
    let s = T::frac_1_sqrt_2();
    [
        Poly::monomial(s.clone(), [2, 0, 0]),
        Poly::monomial(s, [0, 2, 0]),
        Poly::monomial(T::one(), [1, 1, 0]),
    ]
}

/// Lamé-type constant of the reduced isotropic plate, `2λμ/(λ+2μ)`.
pub fn lambda_prime<T: Scalar>(lambda: &T, mu: &T) -> T {
    T::from_i64(2) * lambda.clone() * mu.clone() / (lambda.clone() + T::from_i64(2) * mu.clone())
}

/// Isotropic bending stiffness `μ(λ+μ)/(3(λ+2μ))`, the factor in front of
/// `Δ²` in the bending operator.
pub fn bending_coefficient<T: Scalar>(lambda: &T, mu: &T) -> T {
    mu.clone() * (lambda.clone() + mu.clone())
        / (T::from_i64(3) * (lambda.clone() + T::from_i64(2) * mu.clone()))
}

/// How a first-order symbol `v = (v1, v2, v3)` acts on a polynomial.
///
/// `apply(p, k)` returns `v_k p`. Fields use true derivatives; operator
/// symbols replace in-plane derivatives by multiplication with `ξk`.
pub trait Derivation<T: Scalar> {
    fn apply(&self, p: &Poly<T>, k: usize) -> Poly<T>;
}

/// The in-plane gradient `(∂1, ∂2, 0)` acting on fields.
pub struct FieldInPlane;
/// The thickness gradient `(0, 0, ∂ζ)`, valid for fields and symbols alike.
pub struct Thickness;
/// The in-plane gradient acting on operator symbols (`∂k ↦ ξk`).
pub struct SymbolInPlane;
/// A constant vector such as the normal `±e3`.
pub struct ConstantVector<T>(pub [T; 3]);

impl<T: Scalar> Derivation<T> for FieldInPlane {
    fn apply(&self, p: &Poly<T>, k: usize) -> Poly<T> {
        if k < 2 {
            p.derivative(k)
        } else {
            Poly::zero()
        }
    }
}

impl<T: Scalar> Derivation<T> for Thickness {
    fn apply(&self, p: &Poly<T>, k: usize) -> Poly<T> {
        if k == ZETA {
            p.derivative(ZETA)
        } else {
            Poly::zero()
        }
    }
}

impl<T: Scalar> Derivation<T> for SymbolInPlane {
    fn apply(&self, p: &Poly<T>, k: usize) -> Poly<T> {
        if k < 2 {
            p.mul_var(k)
        } else {
            Poly::zero()
        }
    }
}

impl<T: Scalar> Derivation<T> for ConstantVector<T> {
    fn apply(&self, p: &Poly<T>, k: usize) -> Poly<T> {
        p.scale(&self.0[k])
    }
}

pub type Strain<T> = [Poly<T>; 6];

/// `D(v)u` for a displacement column `u`.
pub fn strain<T: Scalar>(u: &PolyVec<T>, v: &dyn Derivation<T>) -> Strain<T> {
    let s = T::frac_1_sqrt_2();
    [
        v.apply(&u[0], 0),
        v.apply(&u[1], 1),
        v.apply(&u[0], 1).add(&v.apply(&u[1], 0)).scale(&s),
        v.apply(&u[0], 2).add(&v.apply(&u[2], 0)).scale(&s),
        v.apply(&u[1], 2).add(&v.apply(&u[2], 1)).scale(&s),
        v.apply(&u[2], 2),
    ]
}

/// `D(v)ᵀσ` for a stress column `σ`.
pub fn strain_adjoint<T: Scalar>(sigma: &Strain<T>, v: &dyn Derivation<T>) -> PolyVec<T> {
    let s = T::frac_1_sqrt_2();
    [
        v.apply(&sigma[0], 0)
            .add(&v.apply(&sigma[2], 1).scale(&s))
            .add(&v.apply(&sigma[3], 2).scale(&s)),
        v.apply(&sigma[1], 1)
            .add(&v.apply(&sigma[2], 0).scale(&s))
            .add(&v.apply(&sigma[4], 2).scale(&s)),
        v.apply(&sigma[3], 0)
            .scale(&s)
            .add(&v.apply(&sigma[4], 1).scale(&s))
            .add(&v.apply(&sigma[5], 2)),
    ]
}

/// `Aε` for a polynomial strain column.
pub fn apply_stiffness<T: Scalar>(a: &Mat<T>, e: &Strain<T>) -> Strain<T> {
    let mut out: Strain<T> = Default::default();
    for (i, o) in out.iter_mut().enumerate() {
        for (j, ej) in e.iter().enumerate() {
            if a[(i, j)].is_zero() || ej.is_zero() {
                continue;
            }
            o.add_assign(&ej.scale(&a[(i, j)]));
        }
    }
    out
}

/// The pieces of the stretched 3D operators on a layer of unit thickness.
///
/// With `z = hζ` the Lamé operator splits as
/// `L = h⁻²L⁰ + h⁻¹L¹ + L²` and the traction operators on `ζ = ±1/2` as
/// `N± = h⁻¹N⁰± + N¹±`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerPart {
    L0,
    L1,
    L2,
    N0Plus,
    N0Minus,
    N1Plus,
    N1Minus,
}

/// Applies one operator part to `u`. In-plane derivatives act through
/// `in_plane`, so the same code serves fields ([`FieldInPlane`]) and
/// operator symbols ([`SymbolInPlane`]). Traction parts are returned as
/// functions of `ζ`; evaluate them at `ζ = ±1/2` to get boundary values.
pub fn layer_part<T: Scalar>(
    a: &Mat<T>,
    u: &PolyVec<T>,
    part: LayerPart,
    in_plane: &dyn Derivation<T>,
) -> PolyVec<T> {
    let thick = Thickness;
    let neg = |v: PolyVec<T>| [v[0].neg(), v[1].neg(), v[2].neg()];
    let e3 = |sign: i64| ConstantVector([T::zero(), T::zero(), T::from_i64(sign)]);
    match part {
        LayerPart::L0 => {
            let s = apply_stiffness(a, &strain(u, &thick));
            neg(strain_adjoint(&s, &thick))
        }
        LayerPart::L1 => {
            let sy = apply_stiffness(a, &strain(u, in_plane));
            let sz = apply_stiffness(a, &strain(u, &thick));
            let p = strain_adjoint(&sy, &thick);
            let q = strain_adjoint(&sz, in_plane);
            neg(crate::poly::polyvec_add(&p, &q))
        }
        LayerPart::L2 => {
            let s = apply_stiffness(a, &strain(u, in_plane));
            neg(strain_adjoint(&s, in_plane))
        }
        LayerPart::N0Plus | LayerPart::N0Minus => {
            let sign = if part == LayerPart::N0Plus { 1 } else { -1 };
            let s = apply_stiffness(a, &strain(u, &thick));
            strain_adjoint(&s, &e3(sign))
        }
        LayerPart::N1Plus | LayerPart::N1Minus => {
            let sign = if part == LayerPart::N1Plus { 1 } else { -1 };
            let s = apply_stiffness(a, &strain(u, in_plane));
            strain_adjoint(&s, &e3(sign))
        }
    }
}

/// Convenience wrapper of [`layer_part`] for polynomial fields in `(y1, y2, ζ)`.
pub fn layer_operator_parts<T: Scalar>(a: &StiffnessMatrix<T>, u: &PolyVec<T>, part: LayerPart) -> PolyVec<T> {
    layer_part(a.matrix(), u, part, &FieldInPlane)
}

/// Material description accepted in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaterialSpec {
    Isotropic { lambda: f64, mu: f64 },
    General {
        #[serde(rename = "A")]
        a: Vec<f64>,
    },
}

impl MaterialSpec {
    pub fn stiffness(&self) -> Result<StiffnessMatrix<f64>> {
        match self {
            MaterialSpec::Isotropic { lambda, mu } => StiffnessMatrix::isotropic(*lambda, *mu),
            MaterialSpec::General { a } => StiffnessMatrix::from_upper_triangle(a),
        }
    }

    /// Parses `iso:λ,μ` shorthand or a JSON object.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("iso:") {
            let parts: Vec<_> = rest.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Config(format!("expected iso:LAMBDA,MU, got {s}")));
            }
            let p = |t: &str| t.parse::<f64>().map_err(|e| Error::Config(format!("bad number {t}: {e}")));
            return Ok(MaterialSpec::Isotropic { lambda: p(parts[0])?, mu: p(parts[1])? });
        }
        Ok(serde_json::from_str(s)?)
    }
}

impl Default for MaterialSpec {
    fn default() -> Self {
        MaterialSpec::Isotropic { lambda: 1.0, mu: 1.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Surd;

    #[test]
    fn unit_lame_reduced_entries() {
        let a = StiffnessMatrix::isotropic(Surd::int(1), Surd::int(1)).unwrap();
        let a0 = a.reduced();
        assert_eq!(a0.matrix()[(0, 0)], Surd::ratio(8, 3));
        assert_eq!(a0.matrix()[(0, 1)], Surd::ratio(2, 3));
        assert_eq!(a0.matrix()[(2, 2)], Surd::int(2));
    }

    #[test]
    fn negative_mu_rejected() {
        assert!(StiffnessMatrix::isotropic(1.0, -1.0).is_err());
        assert!(StiffnessMatrix::isotropic(-0.5, 1.0).is_err());
    }

    #[test]
    fn unit_lame_bending_symbol_is_bilaplacian() {
        let a = StiffnessMatrix::isotropic(Surd::int(1), Surd::int(1)).unwrap();
        let sym = a.reduced().bending_symbol();
        let lap2 = Poly::monomial(Surd::one(), [4, 0, 0])
            .add(&Poly::monomial(Surd::int(2), [2, 2, 0]))
            .add(&Poly::monomial(Surd::one(), [0, 4, 0]));
        assert_eq!(sym, lap2.scale(&Surd::ratio(2, 9)));
    }

    #[test]
    fn identity_material_is_lambda_zero_mu_half() {
        let a = StiffnessMatrix::isotropic(0.0, 0.5).unwrap();
        assert_eq!(a.matrix(), &Mat::identity(6));
    }

    #[test]
    fn material_spec_forms() {
        let m = MaterialSpec::parse(r#"{"lambda": 1, "mu": 2}"#).unwrap();
        assert_eq!(m, MaterialSpec::Isotropic { lambda: 1.0, mu: 2.0 });
        let m = MaterialSpec::parse("iso:0.5,1").unwrap();
        assert_eq!(m, MaterialSpec::Isotropic { lambda: 0.5, mu: 1.0 });
        let iso = StiffnessMatrix::isotropic(1.0, 1.0).unwrap();
        let json = serde_json::json!({ "A": iso.upper_triangle() }).to_string();
        assert_eq!(MaterialSpec::parse(&json).unwrap().stiffness().unwrap(), iso);
    }
}
