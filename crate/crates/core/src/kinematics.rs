//! Syringe-plunger kinematics: converting volumes and rates to motor steps.
//!
//! One full step advances the plunger by `full_step_mm`; the displaced volume
//! is that travel times the barrel cross-section, so with millimetre inputs
//! the product comes out directly in microlitres (1 mm³ = 1 µL).
//!
//! The products and quotients are carried in double-word arithmetic and
//! rounded once at the end, which keeps every result within one ulp of the
//! exact value for the full input domain.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::{Scalar, Wide};

/// Default plunger travel per full step of the linear stepper, in mm.
pub const DEFAULT_FULL_STEP_MM: f64 = 0.0018;
/// Default barrel inner diameter (typical 10 mL syringe), in mm.
pub const DEFAULT_INNER_DIAMETER_MM: f64 = 14.50;
/// Default fluid density (aqueous drug), in g/mL.
pub const DEFAULT_FLUID_DENSITY_G_ML: f64 = 1.000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Kinematics<S> {
    pub full_step_mm: S,
    pub inner_diameter_mm: S,
    pub fluid_density_g_ml: S,
}

impl<S: Scalar> Default for Kinematics<S> {
    fn default() -> Self {
        Self {
            full_step_mm: S::lit(DEFAULT_FULL_STEP_MM),
            inner_diameter_mm: S::lit(DEFAULT_INNER_DIAMETER_MM),
            fluid_density_g_ml: S::lit(DEFAULT_FLUID_DENSITY_G_ML),
        }
    }
}

impl<S: Scalar> Kinematics<S> {
    pub fn new(full_step_mm: S, inner_diameter_mm: S, fluid_density_g_ml: S) -> Result<Self> {
        let k = Self {
            full_step_mm,
            inner_diameter_mm,
            fluid_density_g_ml,
        };
        k.check()?;
        Ok(k)
    }

    pub fn check(&self) -> Result<()> {
        let positive = |x: S| x.is_finite() && x > S::zero();
        if !positive(self.full_step_mm) {
            return Err(CoreError::InvalidKinematics("full_step_mm must be positive"));
        }
        if !positive(self.inner_diameter_mm) {
            return Err(CoreError::InvalidKinematics("inner_diameter_mm must be positive"));
        }
        if !positive(self.fluid_density_g_ml) {
            return Err(CoreError::InvalidKinematics("fluid_density_g_ml must be positive"));
        }
        if !positive(self.volume_per_step_ul()) {
            return Err(CoreError::InvalidKinematics("volume per step underflows"));
        }
        Ok(())
    }

    fn wide_volume_per_step(&self) -> Wide<S> {
        let radius = self.inner_diameter_mm / S::lit(2.0);
        Wide::from_product(radius, radius)
            .mul_scalar(self.full_step_mm)
            .mul(Wide::pi())
    }

    /// Volume displaced by one full step, in µL.
    pub fn volume_per_step_ul(&self) -> S {
        self.wide_volume_per_step().value()
    }

    pub fn volume_per_step_ml(&self) -> S {
        self.volume_per_step_ul() / S::lit(1000.0)
    }

    /// Nearest whole number of steps for `volume_ml`, ties away from zero.
    pub fn volume_to_steps(&self, volume_ml: S) -> Result<u64> {
        if !volume_ml.is_finite() || volume_ml < S::zero() {
            return Err(CoreError::InvalidVolume(volume_ml.to_f64().unwrap_or(f64::NAN)));
        }
        if volume_ml == S::zero() {
            return Ok(0);
        }
        let q = Wide::from_product(volume_ml, S::lit(1000.0)).div(self.wide_volume_per_step());
        Ok(round_half_away(q))
    }

    /// Seconds between consecutive steps to sustain `rate_ml_h`.
    pub fn rate_to_step_interval(&self, rate_ml_h: S) -> Result<S> {
        if !rate_ml_h.is_finite() || rate_ml_h <= S::zero() {
            return Err(CoreError::InvalidRate(rate_ml_h.to_f64().unwrap_or(f64::NAN)));
        }
        // µL per step / (µL per second)
        let numerator = self.wide_volume_per_step().mul_scalar(S::lit(3600.0));
        let denominator = Wide::from_product(rate_ml_h, S::lit(1000.0));
        Ok(numerator.div(denominator).value())
    }

    /// Volume delivered by `steps` nominal steps, in mL.
    pub fn steps_to_volume_ml(&self, steps: u64) -> S {
        let steps = S::from_u64(steps).unwrap_or_else(S::infinity);
        self.wide_volume_per_step()
            .mul_scalar(steps)
            .mul_scalar(S::lit(1e-3))
            .value()
    }
}

fn round_half_away<S: Scalar>(q: Wide<S>) -> u64 {
    let floor = q.hi.floor();
    // exact for hi >= 0; since |lo| <= ulp(hi)/2 only an exact .5 in hi
    // leaves the direction to the sign of lo
    let frac = q.hi - floor;
    let half = S::lit(0.5);
    let up = frac > half || (frac == half && q.lo >= S::zero());
    let n = if up { floor + S::one() } else { floor };
    n.to_u64().unwrap_or(u64::MAX)
}
