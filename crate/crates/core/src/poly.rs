//! Polynomials in three variables with coefficients in a [`Scalar`] field.
//!
//! The same type plays two roles. As a *field* its variables are
//! `(y1, y2, ζ)`. As an *operator symbol* of a constant-coefficient
//! differential operator in the plane, variables 0 and 1 stand for `∂1, ∂2`
//! while variable 2 is still the thickness coordinate `ζ`.

use std::collections::BTreeMap;
use std::fmt;

use crate::scalar::Scalar;

pub type Exponent = [u16; 3];

/// Index of the thickness variable.
pub const ZETA: usize = 2;

#[derive(Clone, PartialEq)]
pub struct Poly<T> {
    terms: BTreeMap<Exponent, T>,
}

impl<T: Scalar> Default for Poly<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> Poly<T> {
    pub fn zero() -> Self {
        Self { terms: BTreeMap::new() }
    }

    pub fn constant(c: T) -> Self {
        Self::monomial(c, [0, 0, 0])
    }

    pub fn monomial(c: T, e: Exponent) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(e, c);
        }
        Self { terms }
    }

    /// The coordinate function `x_var`.
    pub fn var(var: usize) -> Self {
        let mut e = [0; 3];
        e[var] = 1;
        Self::monomial(T::one(), e)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &T)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &Exponent) -> T {
        self.terms.get(e).cloned().unwrap_or_else(T::zero)
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().map(|&k| k as u32).sum()).max()
    }

    pub fn degree_in(&self, var: usize) -> Option<u16> {
        self.terms.keys().map(|e| e[var]).max()
    }

    fn add_term(&mut self, e: Exponent, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(v) => {
                *v += c;
                if v.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(*e, c.clone());
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(*e, -c.clone());
        }
        r
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (e, c) in &o.terms {
            self.add_term(*e, c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        Self { terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect() }
    }

    pub fn scale(&self, s: &T) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self { terms: self.terms.iter().map(|(e, c)| (*e, c.clone() * s.clone())).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut r = Self::zero();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e = [ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]];
                r.add_term(e, ca.clone() * cb.clone());
            }
        }
        r
    }

    /// Multiply by the coordinate `x_var`.
    pub fn mul_var(&self, var: usize) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|(e, c)| {
                    let mut e = *e;
                    e[var] += 1;
                    (e, c.clone())
                })
                .collect(),
        }
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut f = *e;
            f[var] -= 1;
            r.add_term(f, c.clone() * T::from_i64(e[var] as i64));
        }
        r
    }

    /// Antiderivative in `var` vanishing at `x_var = 0`.
    pub fn antiderivative(&self, var: usize) -> Self {
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            let mut f = *e;
            f[var] += 1;
            r.add_term(f, c.clone() / T::from_i64(f[var] as i64));
        }
        r
    }

    /// Substitute the constant `value` for `x_var`.
    pub fn substitute(&self, var: usize, value: &T) -> Self {
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            let mut f = *e;
            f[var] = 0;
            let mut p = c.clone();
            for _ in 0..e[var] {
                p = p * value.clone();
            }
            r.add_term(f, p);
        }
        r
    }

    /// Definite integral in `var` over `[a, b]`.
    pub fn integrate(&self, var: usize, a: &T, b: &T) -> Self {
        let anti = self.antiderivative(var);
        anti.substitute(var, b).sub(&anti.substitute(var, a))
    }

    pub fn eval_f64(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64() * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
            })
            .sum()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Poly<U> {
        let mut r = Poly::zero();
        for (e, c) in &self.terms {
            r.add_term(*e, f(c));
        }
        r
    }

    pub fn to_f64(&self) -> Poly<f64> {
        self.map(T::to_f64)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().map(|c| c.to_f64().abs()).fold(0.0, f64::max)
    }
}

impl<T: Scalar + fmt::Display> fmt::Display for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (k, name) in ["x", "y", "z"].iter().enumerate() {
                match e[k] {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    p => write!(f, "*{name}^{p}")?,
                }
            }
        }
        Ok(())
    }
}

impl<T: fmt::Debug> fmt::Debug for Poly<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// A column of three polynomials: a displacement field or a column of an
/// operator matrix.
pub type PolyVec<T> = [Poly<T>; 3];

pub fn polyvec_zero<T: Scalar>() -> PolyVec<T> {
    [Poly::zero(), Poly::zero(), Poly::zero()]
}

pub fn polyvec_add<T: Scalar>(a: &PolyVec<T>, b: &PolyVec<T>) -> PolyVec<T> {
    [a[0].add(&b[0]), a[1].add(&b[1]), a[2].add(&b[2])]
}

pub fn polyvec_sub<T: Scalar>(a: &PolyVec<T>, b: &PolyVec<T>) -> PolyVec<T> {
    [a[0].sub(&b[0]), a[1].sub(&b[1]), a[2].sub(&b[2])]
}

pub fn polyvec_is_zero<T: Scalar>(a: &PolyVec<T>) -> bool {
    a.iter().all(Poly::is_zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Surd;

    #[test]
    fn derivative_and_antiderivative_are_inverse() {
        let p = Poly::monomial(Surd::ratio(3, 7), [2, 1, 3]).add(&Poly::var(ZETA));
        assert_eq!(p.antiderivative(ZETA).derivative(ZETA), p);
    }

    #[test]
    fn centered_integral_of_zeta_squared() {
        let z2 = Poly::<Surd>::var(ZETA).mul_var(ZETA);
        let half = Surd::ratio(1, 2);
        let i = z2.integrate(ZETA, &-half.clone(), &half);
        assert_eq!(i, Poly::constant(Surd::ratio(1, 12)));
    }
}
