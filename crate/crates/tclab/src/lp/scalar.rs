use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic abstraction for the simplex kernel: `f64` with tolerances or
/// arbitrary-precision rationals with exact comparisons.
pub trait Scalar:
    Clone
    + PartialOrd
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Conversion from input data; `None` for values the arithmetic cannot
    /// represent (non-finite floats).
    fn from_f64(v: f64) -> Option<Self>;
    fn to_f64(&self) -> f64;
    fn abs(&self) -> Self;
    /// Comparison tolerance used for pivot and sign tests. Zero for exact
    /// arithmetic.
    fn default_tol() -> Self;

    fn is_zero_within(&self, tol: &Self) -> bool {
        self.abs() <= *tol
    }
    fn is_pos_within(&self, tol: &Self) -> bool {
        *self > *tol
    }
    fn is_neg_within(&self, tol: &Self) -> bool {
        *self < -tol.clone()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Option<Self> {
        v.is_finite().then_some(v)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn default_tol() -> Self {
        1e-9
    }
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(v: f64) -> Option<Self> {
        // Every finite f64 is a dyadic rational, so this is exact.
        BigRational::from_float(v)
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn default_tol() -> Self {
        Zero::zero()
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let numer = bigint_to_f64(r.numer());
    let denom = bigint_to_f64(r.denom());
    numer / denom
}

fn bigint_to_f64(n: &BigInt) -> f64 {
    let (sign, digits) = n.to_u64_digits();
    let mut v = 0.0f64;
    for d in digits.iter().rev() {
        v = v * 1.8446744073709552e19 + *d as f64;
    }
    match sign {
        num_bigint::Sign::Minus => -v,
        _ => v,
    }
}
