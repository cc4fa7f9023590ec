//! Scalar abstraction shared by the kinematic and dispensing math.
//!
//! Everything numeric in this crate is written against [`Scalar`] so the same
//! code runs in `f32` (firmware-sized) and `f64` (server and bench). The
//! crate root exports `f64` aliases for day-to-day use.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type usable by the kinematics and dispensing code.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Low word of π in this precision: `PI + PI_LO` is π to twice the
    /// working precision.
    fn pi_lo() -> Self;

    /// Converts an `f64` literal, rounding to nearest.
    fn lit(x: f64) -> Self;
}

impl Scalar for f64 {
    fn pi_lo() -> Self {
        1.224_646_799_147_353_2e-16
    }

    fn lit(x: f64) -> Self {
        x
    }
}

impl Scalar for f32 {
    fn pi_lo() -> Self {
        // π − (π as f32), evaluated in f64 and rounded.
        (std::f64::consts::PI - std::f32::consts::PI as f64) as f32
    }

    fn lit(x: f64) -> Self {
        x as f32
    }
}

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
///
/// Used to carry the volume-per-step product and the step quotients at twice
/// the working precision so the final results round once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Wide<S> {
    pub hi: S,
    pub lo: S,
}

impl<S: Scalar> Wide<S> {
    pub fn new(hi: S, lo: S) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn from_product(a: S, b: S) -> Self {
        let p = a * b;
        let e = a.mul_add(b, -p);
        Self { hi: p, lo: e }
    }

    pub fn pi() -> Self {
        Self {
            hi: S::PI(),
            lo: S::pi_lo(),
        }
    }

    pub fn mul_scalar(self, b: S) -> Self {
        let p = Self::from_product(self.hi, b);
        Self::new(p.hi, p.lo + self.lo * b)
    }

    pub fn mul(self, other: Self) -> Self {
        let p = Self::from_product(self.hi, other.hi);
        let cross = self.hi * other.lo + self.lo * other.hi;
        Self::new(p.hi, p.lo + cross)
    }

    pub fn sub(self, other: Self) -> Self {
        let (s, e) = two_sum(self.hi, -other.hi);
        Self::new(s, e + self.lo - other.lo)
    }

    pub fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul_scalar(q1));
        let q2 = r.hi / other.hi;
        let r = r.sub(other.mul_scalar(q2));
        let q3 = r.hi / other.hi;
        let (hi, lo) = two_sum(q1, q2);
        Self::new(hi, lo + q3)
    }

    pub fn value(self) -> S {
        self.hi + self.lo
    }
}

fn two_sum<S: Scalar>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

fn quick_two_sum<S: Scalar>(a: S, b: S) -> (S, S) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_words_add_up() {
        let pi = Wide::<f64>::pi();
        assert_eq!(pi.hi, std::f64::consts::PI);
        assert!(pi.lo.abs() < f64::EPSILON * pi.hi);

        let pi32 = Wide::<f32>::pi();
        let recombined = pi32.hi as f64 + pi32.lo as f64;
        assert!((recombined - std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn wide_division_recovers_thirds() {
        let one = Wide::new(1.0_f64, 0.0);
        let three = Wide::new(3.0_f64, 0.0);
        let q = one.div(three);
        // 1/3 = hi + lo, with the residual far below f64 precision
        let back = q.mul_scalar(3.0);
        assert!((back.hi - 1.0).abs() <= f64::EPSILON);
        assert!((back.hi - 1.0 + back.lo).abs() < 1e-30);
    }

    #[test]
    fn product_is_error_free() {
        let a = 0.1_f64;
        let b = 0.7_f64;
        let w = Wide::from_product(a, b);
        assert_eq!(w.hi, a * b);
        assert_ne!(w.lo, 0.0);
    }
}
