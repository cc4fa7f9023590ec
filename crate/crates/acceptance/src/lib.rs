//! Exact rational arithmetic for checking the syringe kinematics.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

const PI_50: &str = "3.14159265358979323846264338327950288419716939937510";

/// π truncated to 50 decimal places.
pub fn pi() -> BigRational {
    let (int, frac) = PI_50.split_once('.').unwrap();
    let digits: BigInt = format!("{int}{frac}").parse().unwrap();
    BigRational::new(digits, BigInt::from(10u32).pow(frac.len() as u32))
}

/// The exact value of a finite `f64`.
pub fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

fn step_volume_ul(full_step_mm: f64, diameter_mm: f64) -> BigRational {
    let r = exact(diameter_mm) / BigRational::from_integer(2.into());
    pi() * &r * &r * exact(full_step_mm)
}

/// Steps needed for `volume_ml`, before rounding.
pub fn steps_for(volume_ml: f64, full_step_mm: f64, diameter_mm: f64) -> BigRational {
    exact(volume_ml) * BigRational::from_integer(1000.into()) / step_volume_ul(full_step_mm, diameter_mm)
}

/// Seconds between steps at `rate_ml_h`.
pub fn interval_for(rate_ml_h: f64, full_step_mm: f64, diameter_mm: f64) -> BigRational {
    step_volume_ul(full_step_mm, diameter_mm) * BigRational::from_integer(3600.into())
        / (exact(rate_ml_h) * BigRational::from_integer(1000.into()))
}

/// Nearest integer, ties away from zero.
pub fn round_half_away(q: &BigRational) -> BigInt {
    let half = BigRational::new(1.into(), 2.into());
    if q.is_negative() {
        -(-q + half).floor().to_integer()
    } else {
        (q + half).floor().to_integer()
    }
}

/// Distance from `x` to `truth` in units of the ulp at `x`.
pub fn ulps(x: f64, truth: &BigRational) -> f64 {
    if x == 0.0 {
        return if truth.is_zero() { 0.0 } else { f64::INFINITY };
    }
    let up = f64::from_bits(x.abs().to_bits() + 1) - x.abs();
    let diff = (exact(x) - truth).abs() / exact(up);
    diff.to_f64().unwrap_or(f64::INFINITY)
}

pub fn is_integer(q: &BigRational) -> bool {
    q.denom().is_one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_is_close() {
        let err = (pi() - exact(std::f64::consts::PI)).abs();
        assert!(err < exact(1e-15));
    }

    #[test]
    fn rounding() {
        let q = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert_eq!(round_half_away(&q(5, 2)), 3.into());
        assert_eq!(round_half_away(&q(-5, 2)), (-3).into());
        assert_eq!(round_half_away(&q(7, 3)), 2.into());
        assert!(is_integer(&q(4, 2)));
    }

    #[test]
    fn ulp_distance() {
        assert_eq!(ulps(1.0, &exact(1.0)), 0.0);
        assert_eq!(ulps(1.0, &exact(1.0 + f64::EPSILON)), 1.0);
    }

    #[test]
    fn default_syringe_counts() {
        assert_eq!(round_half_away(&steps_for(2.0, 0.0018, 14.5)), 6729.into());
        assert_eq!(round_half_away(&steps_for(5.0, 0.0018, 14.5)), 16822.into());
    }
}
