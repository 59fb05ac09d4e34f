//! Asymptotic reduction of a thin elastic layer to the Kirchhoff plate.
//!
//! A displacement of the layer `|z| < h/2` is sought in the form
//! `u = Σ_p h^p W^p(ζ, ∇y) w(y)` with `ζ = z/h`, where each `W^p` is a 3x3
//! matrix of differential operators with polynomial dependence on `ζ`. The
//! operators are stored as symbols ([`Poly`] in `(ξ1, ξ2, ζ)`), so every
//! identity below is checked exactly on the operator level, independent of
//! the plate field `w`.

use std::fmt::Write as _;

use crate::dense::Mat;
use crate::elastic::{
    bending_strain_symbol, in_plane_strain_symbol, layer_part, Derivation, FieldInPlane, LayerPart,
    ReducedStiffness, StiffnessMatrix, SymbolInPlane,
};
use crate::error::{Error, Result};
use crate::poly::{polyvec_add, polyvec_is_zero, polyvec_sub, polyvec_zero, Poly, PolyVec, ZETA};
use crate::scalar::{Scalar, Surd};

/// A 3x3 operator matrix stored by columns.
pub type OpMatrix<T> = [PolyVec<T>; 3];

fn half<T: Scalar>() -> T {
    T::from_ratio(1, 2)
}

/// `𝕁 = diag(2^{-1/2}, 2^{-1/2}, 1)`: maps `∂ζu` to the transverse Mandel strains.
pub fn transverse_scaling<T: Scalar>() -> Mat<T> {
    let mut j = Mat::identity(3);
    j[(0, 0)] = T::frac_1_sqrt_2();
    j[(1, 1)] = T::frac_1_sqrt_2();
    j
}

fn mat_times_polyvec<T: Scalar>(m: &Mat<T>, v: &PolyVec<T>) -> PolyVec<T> {
    let mut out = polyvec_zero();
    for (i, o) in out.iter_mut().enumerate() {
        for (j, vj) in v.iter().enumerate() {
            if !m[(i, j)].is_zero() {
                o.add_assign(&vj.scale(&m[(i, j)]));
            }
        }
    }
    out
}

fn op_zero<T: Scalar>() -> OpMatrix<T> {
    [polyvec_zero(), polyvec_zero(), polyvec_zero()]
}

pub fn op_is_zero<T: Scalar>(m: &OpMatrix<T>) -> bool {
    m.iter().all(polyvec_is_zero)
}

fn entry<T: Scalar>(m: &OpMatrix<T>, row: usize, col: usize) -> &Poly<T> {
    &m[col][row]
}

/// The first four ansatz operators for one material.
#[derive(Clone, Debug)]
pub struct AnsatzOperators<T> {
    a: Mat<T>,
    reduced: ReducedStiffness<T>,
    w: [OpMatrix<T>; 4],
    /// The `ζ`-independent right-hand side found by the solvability
    /// condition of the cell problem for `W³`.
    membrane_compatibility: OpMatrix<T>,
}

impl<T: Scalar> AnsatzOperators<T> {
    pub fn build(material: &StiffnessMatrix<T>) -> Result<Self> {
        let a = material.matrix().clone();
        let reduced = material.reduced();
        let w0 = w0::<T>();
        let w1 = w1::<T>();
        let w2 = w2(material);
        let mut ops = Self { a, reduced, w: [w0, w1, w2, op_zero()], membrane_compatibility: op_zero() };
        let (w3, target) = ops.solve_cell_problems()?;
        ops.w[3] = w3;
        ops.membrane_compatibility = target;
        Ok(ops)
    }

    pub fn operator(&self, p: usize) -> &OpMatrix<T> {
        &self.w[p]
    }

    pub fn stiffness(&self) -> &Mat<T> {
        &self.a
    }

    pub fn reduced(&self) -> &ReducedStiffness<T> {
        &self.reduced
    }

    fn part(&self, part: LayerPart, col: &PolyVec<T>) -> PolyVec<T> {
        layer_part(&self.a, col, part, &SymbolInPlane)
    }

    fn part_op(&self, part: LayerPart, m: &OpMatrix<T>) -> OpMatrix<T> {
        [self.part(part, &m[0]), self.part(part, &m[1]), self.part(part, &m[2])]
    }

    fn cell_matrix(&self) -> Mat<T> {
        let j = transverse_scaling::<T>();
        j.mul(&self.a.block(3, 3, 3, 3)).mul(&j)
    }

    /// Solves `L⁰W³ = T - L¹W² - L²W¹` in `(-1/2, 1/2)` with
    /// `N⁰±W³ = -N¹±W²` at `ζ = ±1/2`, where `T` is the unique
    /// `ζ`-independent operator making the problem solvable. The solution is
    /// normalised to zero mean in `ζ`.
    fn solve_cell_problems(&self) -> Result<(OpMatrix<T>, OpMatrix<T>)> {
        let b = self.cell_matrix();
        let b_inv = b.inverse().ok_or_else(|| Error::Construction("singular cell matrix".into()))?;
        let (lo, hi) = (-half::<T>(), half::<T>());
        let mut w3 = op_zero();
        let mut target = op_zero();
        for j in 0..3 {
            let r = polyvec_add(
                &self.part(LayerPart::L1, &self.w[2][j]),
                &self.part(LayerPart::L2, &self.w[1][j]),
            );
            let gp = self.part(LayerPart::N1Plus, &self.w[2][j]).map(|p| p.substitute(ZETA, &hi).neg());
            let gm = self.part(LayerPart::N1Minus, &self.w[2][j]).map(|p| p.substitute(ZETA, &lo).neg());
            // Solvability: ∫f + g+ + g- = 0 with f = T - r.
            let t: PolyVec<T> = std::array::from_fn(|i| {
                r[i].integrate(ZETA, &lo, &hi).sub(&gp[i]).sub(&gm[i])
            });
            let f = polyvec_sub(&t, &r);
            // -B v'' = f  =>  v' = -B⁻¹∫₀^ζ f + c1 with B v'(1/2) = g+.
            let f1: PolyVec<T> = std::array::from_fn(|i| f[i].antiderivative(ZETA));
            let f1_hi: PolyVec<T> = std::array::from_fn(|i| f1[i].substitute(ZETA, &hi));
            let c1 = mat_times_polyvec(&b_inv, &polyvec_add(&gp, &f1_hi));
            let dv = polyvec_sub(&c1, &mat_times_polyvec(&b_inv, &f1));
            let v0: PolyVec<T> = std::array::from_fn(|i| dv[i].antiderivative(ZETA));
            let v: PolyVec<T> = std::array::from_fn(|i| v0[i].sub(&v0[i].integrate(ZETA, &lo, &hi)));
            w3[j] = v;
            target[j] = t;
        }
        Ok((w3, target))
    }

    /// `F^q`: the coefficient of `h^{q-2}` in `L Σ h^p W^p`.
    pub fn interior_residual(&self, q: usize) -> OpMatrix<T> {
        let parts = [LayerPart::L0, LayerPart::L1, LayerPart::L2];
        let mut out = op_zero();
        for (i, part) in parts.iter().enumerate() {
            if q < i || q - i > 3 {
                continue;
            }
            let t = self.part_op(*part, &self.w[q - i]);
            for c in 0..3 {
                out[c] = polyvec_add(&out[c], &t[c]);
            }
        }
        out
    }

    /// `G^{q±}`: the coefficient of `h^{q-1}` in `N± Σ h^p W^p` on `ζ = ±1/2`.
    pub fn traction_residual(&self, q: usize, plus: bool) -> OpMatrix<T> {
        let parts = if plus {
            [LayerPart::N0Plus, LayerPart::N1Plus]
        } else {
            [LayerPart::N0Minus, LayerPart::N1Minus]
        };
        let at = if plus { half::<T>() } else { -half::<T>() };
        let mut out = op_zero();
        for (i, part) in parts.iter().enumerate() {
            if q < i || q - i > 3 {
                continue;
            }
            let t = self.part_op(*part, &self.w[q - i]);
            for c in 0..3 {
                let tc = t[c].clone().map(|p| p.substitute(ZETA, &at));
                out[c] = polyvec_add(&out[c], &tc);
            }
        }
        out
    }

    /// `∫F⁴dζ + G⁴⁺ + G⁴⁻`. Its bottom-right entry is the bending operator.
    pub fn bending_compatibility(&self) -> OpMatrix<T> {
        let f4 = self.interior_residual(4);
        let gp = self.traction_residual(4, true);
        let gm = self.traction_residual(4, false);
        let (lo, hi) = (-half::<T>(), half::<T>());
        std::array::from_fn(|c| {
            std::array::from_fn(|r| f4[c][r].integrate(ZETA, &lo, &hi).add(&gp[c][r]).add(&gm[c][r]))
        })
    }

    /// The `ζ`-independent value taken by `F³`.
    pub fn membrane_compatibility(&self) -> &OpMatrix<T> {
        &self.membrane_compatibility
    }

    /// Extracts the limit operators and checks every structural identity of
    /// the ansatz. Returns an error describing the first violated one.
    pub fn verify(&self) -> Result<LimitOperators<T>> {
        for q in 0..3 {
            if !op_is_zero(&self.interior_residual(q)) {
                return Err(Error::Construction(format!("interior residual F^{q} is not zero")));
            }
            for plus in [true, false] {
                if !op_is_zero(&self.traction_residual(q, plus)) {
                    return Err(Error::Construction(format!("traction residual G^{q} is not zero")));
                }
            }
        }
        let f3 = self.interior_residual(3);
        if f3 != self.membrane_compatibility {
            return Err(Error::Construction("F^3 differs from its compatibility value".into()));
        }
        for plus in [true, false] {
            if !op_is_zero(&self.traction_residual(3, plus)) {
                return Err(Error::Construction("traction residual G^3 is not zero".into()));
            }
        }
        let membrane: [[Poly<T>; 2]; 2] =
            std::array::from_fn(|r| std::array::from_fn(|c| entry(&f3, r, c).clone()));
        let stray_membrane = (0..3).any(|r| !entry(&f3, r, 2).is_zero()) || (0..3).any(|c| !entry(&f3, 2, c).is_zero());
        if stray_membrane {
            return Err(Error::Construction("F^3 couples bending and membrane parts".into()));
        }
        let b = self.bending_compatibility();
        if !entry(&b, 2, 0).is_zero() || !entry(&b, 2, 1).is_zero() {
            return Err(Error::Construction("bending compatibility couples to the membrane field".into()));
        }
        let limits = LimitOperators { membrane, bending: entry(&b, 2, 2).clone() };
        if limits.membrane != self.reduced.membrane_symbol() {
            return Err(Error::Construction("extracted membrane operator differs from the reduced one".into()));
        }
        if limits.bending != self.reduced.bending_symbol() {
            return Err(Error::Construction("extracted bending operator differs from the reduced one".into()));
        }
        Ok(limits)
    }

    /// Plain-text listing of all operator entries.
    pub fn dump(&self) -> String
    where
        T: std::fmt::Display,
    {
        let mut s = String::new();
        let _ = writeln!(s, "# variables: x = d/dy1, y = d/dy2, z = zeta; r2 = sqrt(2)");
        for (p, w) in self.w.iter().enumerate() {
            for r in 0..3 {
                for c in 0..3 {
                    let e = entry(w, r, c);
                    if !e.is_zero() {
                        let _ = writeln!(s, "W{p}[{}][{}] = {}", r + 1, c + 1, e);
                    }
                }
            }
        }
        s
    }

    pub fn to_f64(&self) -> AnsatzOperators<f64> {
        let conv = |m: &OpMatrix<T>| -> OpMatrix<f64> {
            std::array::from_fn(|c| std::array::from_fn(|r| m[c][r].to_f64()))
        };
        AnsatzOperators {
            a: self.a.to_f64(),
            reduced: self.reduced.to_f64(),
            w: std::array::from_fn(|p| conv(&self.w[p])),
            membrane_compatibility: conv(&self.membrane_compatibility),
        }
    }
}

impl AnsatzOperators<Surd> {
    pub fn build_exact(material: &StiffnessMatrix<Surd>) -> Result<Self> {
        Self::build(material)
    }
}

/// The plate operators recovered from the ansatz.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitOperators<T> {
    pub membrane: [[Poly<T>; 2]; 2],
    pub bending: Poly<T>,
}

fn w0<T: Scalar>() -> OpMatrix<T> {
    [polyvec_zero(), polyvec_zero(), [Poly::zero(), Poly::zero(), Poly::constant(T::one())]]
}

fn w1<T: Scalar>() -> OpMatrix<T> {
    let minus_zeta = Poly::monomial(-T::one(), [0, 0, 1]);
    [
        [Poly::constant(T::one()), Poly::zero(), Poly::zero()],
        [Poly::zero(), Poly::constant(T::one()), Poly::zero()],
        [minus_zeta.mul_var(0), minus_zeta.mul_var(1), Poly::zero()],
    ]
}

/// `W² = 𝕁⁻¹A_zz⁻¹A_zy (-ζI, √2(ζ²/2 - 1/24)I) 𝒟(∇y)`: the transverse
/// correction that relaxes the transverse stresses at leading order.
fn w2<T: Scalar>(material: &StiffnessMatrix<T>) -> OpMatrix<T> {
    let j_inv = transverse_scaling::<T>().inverse().expect("diagonal scaling is invertible");
    let zz_inv = material.block_zz().inverse().expect("A_zz is invertible");
    let m = j_inv.mul(&zz_inv).mul(&material.block_zy());
    let minus_zeta = Poly::monomial(-T::one(), [0, 0, 1]);
    let quad = Poly::monomial(half::<T>(), [0, 0, 2])
        .sub(&Poly::constant(T::from_ratio(1, 24)))
        .scale(&T::sqrt_2());
    let dp = in_plane_strain_symbol::<T>();
    let d3 = bending_strain_symbol::<T>();
    std::array::from_fn(|col| {
        let inner: PolyVec<T> = std::array::from_fn(|row| {
            if col < 2 {
                dp[row][col].mul(&minus_zeta)
            } else {
                d3[row].mul(&quad)
            }
        });
        mat_times_polyvec(&m, &inner)
    })
}

/// Applies an operator symbol to a polynomial plate field `w(y)`.
pub fn apply_symbol<T: Scalar>(symbol: &Poly<T>, w: &Poly<T>) -> Poly<T> {
    let mut out = Poly::zero();
    for (e, c) in symbol.terms() {
        let mut t = w.clone();
        for _ in 0..e[0] {
            t = t.derivative(0);
        }
        for _ in 0..e[1] {
            t = t.derivative(1);
        }
        for _ in 0..e[ZETA] {
            t = t.mul_var(ZETA);
        }
        out.add_assign(&t.scale(c));
    }
    out
}

/// `W w` for an operator matrix and a plate field `w = (w1, w2, w3)`.
pub fn apply_operator<T: Scalar>(m: &OpMatrix<T>, w: &PolyVec<T>) -> PolyVec<T> {
    let mut out = polyvec_zero();
    for (col, wc) in w.iter().enumerate() {
        if wc.is_zero() {
            continue;
        }
        for (row, o) in out.iter_mut().enumerate() {
            o.add_assign(&apply_symbol(&m[col][row], wc));
        }
    }
    out
}

/// Residuals of the ansatz applied to one concrete plate field, computed by
/// differentiating the resulting 3D polynomial fields directly. This is an
/// independent path from the operator-level identities in
/// [`AnsatzOperators::verify`].
#[derive(Clone, Debug)]
pub struct FieldResidual<T> {
    pub interior: Vec<PolyVec<T>>,
    pub traction_plus: Vec<PolyVec<T>>,
    pub traction_minus: Vec<PolyVec<T>>,
}

pub fn field_residuals<T: Scalar>(ops: &AnsatzOperators<T>, w: &PolyVec<T>) -> FieldResidual<T> {
    let u: Vec<PolyVec<T>> = (0..4).map(|p| apply_operator(ops.operator(p), w)).collect();
    let d: &dyn Derivation<T> = &FieldInPlane;
    let a = ops.stiffness();
    let interior = (0..6)
        .map(|q| {
            let mut acc = polyvec_zero();
            for (i, part) in [LayerPart::L0, LayerPart::L1, LayerPart::L2].iter().enumerate() {
                if q >= i && q - i <= 3 {
                    acc = polyvec_add(&acc, &layer_part(a, &u[q - i], *part, d));
                }
            }
            acc
        })
        .collect();
    let traction = |plus: bool| -> Vec<PolyVec<T>> {
        let parts = if plus {
            [LayerPart::N0Plus, LayerPart::N1Plus]
        } else {
            [LayerPart::N0Minus, LayerPart::N1Minus]
        };
        let at = if plus { half::<T>() } else { -half::<T>() };
        (0..5)
            .map(|q| {
                let mut acc = polyvec_zero();
                for (i, part) in parts.iter().enumerate() {
                    if q >= i && q - i <= 3 {
                        acc = polyvec_add(&acc, &layer_part(a, &u[q - i], *part, d));
                    }
                }
                acc.map(|p| p.substitute(ZETA, &at))
            })
            .collect()
    };
    FieldResidual { interior, traction_plus: traction(true), traction_minus: traction(false) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_lame_ansatz_verifies() {
        let a = StiffnessMatrix::isotropic(Surd::int(1), Surd::int(1)).unwrap();
        let ops = AnsatzOperators::build(&a).unwrap();
        let lim = ops.verify().unwrap();
        assert_eq!(lim.bending, a.reduced().bending_symbol());
    }

    #[test]
    fn second_operator_has_zero_mean_in_zeta() {
        let a = StiffnessMatrix::isotropic(Surd::int(2), Surd::int(1)).unwrap();
        let ops = AnsatzOperators::build(&a).unwrap();
        let (lo, hi) = (Surd::ratio(-1, 2), Surd::ratio(1, 2));
        for p in [2, 3] {
            for col in ops.operator(p) {
                for e in col {
                    assert!(e.integrate(ZETA, &lo, &hi).is_zero());
                }
            }
        }
    }
}

#[cfg(test)]
mod anisotropic_tests {
    use super::*;
    use crate::dense::Mat;

    #[test]
    fn fully_anisotropic_ansatz_verifies() {
        let b = Mat::from_fn(6, 6, |i, j| Surd::int(((3 * i + 5 * j + i * j) % 7) as i64 - 3));
        let a = b.transpose().mul(&b).add(&Mat::identity(6));
        let a = StiffnessMatrix::new(a).unwrap();
        let ops = AnsatzOperators::build(&a).unwrap();
        ops.verify().unwrap();
    }
}
