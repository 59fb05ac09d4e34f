//! Scalar fields used by the algebraic parts of the crate.
//!
//! Everything that has to be *exact* (reduced stiffness, the ansatz
//! operators, Gram matrices of rigid motions) runs over [`Surd`], the field
//! of numbers `a + b·√2` with rational `a`, `b`. The Mandel strain column
//! carries factors `2^{-1/2}`, so plain rationals are not closed under the
//! operations we need. The same generic code also runs over `f64`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub trait Scalar:
    Clone
    + fmt::Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_ratio(num: i64, den: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn to_f64(&self) -> f64;
    /// `2^{-1/2}` in this field.
    fn frac_1_sqrt_2() -> Self;
    /// `2^{1/2}` in this field.
    fn sqrt_2() -> Self;

    fn abs(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn frac_1_sqrt_2() -> Self {
        std::f64::consts::FRAC_1_SQRT_2
    }
    fn sqrt_2() -> Self {
        std::f64::consts::SQRT_2
    }
}

/// Exact number `rational + root2·√2`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    pub rational: BigRational,
    pub root2: BigRational,
}

impl Surd {
    pub fn new(rational: BigRational, root2: BigRational) -> Self {
        Self { rational, root2 }
    }

    pub fn from_rational(r: BigRational) -> Self {
        Self { rational: r, root2: BigRational::zero() }
    }

    pub fn int(v: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact binary value of a finite float.
    pub fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v).map(Self::from_rational)
    }

    pub fn is_rational(&self) -> bool {
        self.root2.is_zero()
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        self.is_rational().then_some(&self.rational)
    }

    /// Conjugate `a - b√2`.
    pub fn conjugate(&self) -> Self {
        Self { rational: self.rational.clone(), root2: -self.root2.clone() }
    }

    /// Field norm `a² - 2b²`, rational and nonzero for nonzero input.
    pub fn norm(&self) -> BigRational {
        let two = BigRational::from_integer(BigInt::from(2));
        &self.rational * &self.rational - two * &self.root2 * &self.root2
    }

    pub fn recip(&self) -> Self {
        let n = self.norm();
        assert!(!n.is_zero(), "division by zero in Q(sqrt 2)");
        let c = self.conjugate();
        Self { rational: c.rational / &n, root2: c.root2 / n }
    }

    /// Sign computed exactly: compare `a` against `-b√2` through squares.
    pub fn signum(&self) -> i32 {
        let sa = sign_of(&self.rational);
        let sb = sign_of(&self.root2);
        if sa == sb || sb == 0 {
            return sa;
        }
        if sa == 0 {
            return sb;
        }
        // Opposite signs: the term with the larger square wins.
        let a2 = &self.rational * &self.rational;
        let b2 = BigRational::from_integer(BigInt::from(2)) * &self.root2 * &self.root2;
        match a2.cmp(&b2) {
            Ordering::Greater => sa,
            Ordering::Less => sb,
            Ordering::Equal => 0,
        }
    }
}

fn sign_of(r: &BigRational) -> i32 {
    if r.is_zero() {
        0
    } else if r.is_positive() {
        1
    } else {
        -1
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.rational.is_zero(), self.root2.is_zero()) {
            (_, true) => write!(f, "{}", self.rational),
            (true, false) => write!(f, "{}*r2", self.root2),
            (false, false) => write!(f, "{}+{}*r2", self.rational, self.root2),
        }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some((self.clone() - other.clone()).signum().cmp(&0))
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, o: Surd) -> Surd {
        Surd { rational: self.rational + o.rational, root2: self.root2 + o.root2 }
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, o: Surd) -> Surd {
        Surd { rational: self.rational - o.rational, root2: self.root2 - o.root2 }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, o: Surd) -> Surd {
        &self * &o
    }
}

impl<'a> Mul<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn mul(self, o: &Surd) -> Surd {
        if self.is_rational() && o.is_rational() {
            return Surd::from_rational(&self.rational * &o.rational);
        }
        let two = BigRational::from_integer(BigInt::from(2));
        Surd {
            rational: &self.rational * &o.rational + two * &self.root2 * &o.root2,
            root2: &self.rational * &o.root2 + &self.root2 * &o.rational,
        }
    }
}

impl Div for Surd {
    type Output = Surd;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Surd) -> Surd {
        if o.is_rational() {
            return Surd { rational: self.rational / &o.rational, root2: self.root2 / o.rational };
        }
        self * o.recip()
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd { rational: -self.rational, root2: -self.root2 }
    }
}

impl AddAssign for Surd {
    fn add_assign(&mut self, o: Surd) {
        self.rational += o.rational;
        self.root2 += o.root2;
    }
}

impl SubAssign for Surd {
    fn sub_assign(&mut self, o: Surd) {
        self.rational -= o.rational;
        self.root2 -= o.root2;
    }
}

impl MulAssign for Surd {
    fn mul_assign(&mut self, o: Surd) {
        *self = &*self * &o;
    }
}

impl Scalar for Surd {
    fn zero() -> Self {
        Surd::from_rational(BigRational::zero())
    }
    fn one() -> Self {
        Surd::from_rational(BigRational::one())
    }
    fn from_i64(v: i64) -> Self {
        Surd::int(v)
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        Surd::ratio(num, den)
    }
    fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.root2.is_zero()
    }
    fn to_f64(&self) -> f64 {
        let a = self.rational.to_f64().unwrap_or(f64::NAN);
        let b = self.root2.to_f64().unwrap_or(f64::NAN);
        a + b * std::f64::consts::SQRT_2
    }
    fn frac_1_sqrt_2() -> Self {
        Surd { rational: BigRational::zero(), root2: BigRational::new(1.into(), 2.into()) }
    }
    fn sqrt_2() -> Self {
        Surd { rational: BigRational::zero(), root2: BigRational::one() }
    }
}
