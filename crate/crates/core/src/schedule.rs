use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinematics::Kinematics;
use crate::scalar::Scalar;

/// Constant-rate step plan for one volume/rate order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StepSchedule<S> {
    pub steps_total: u64,
    pub step_interval_s: S,
}

impl<S: Scalar> StepSchedule<S> {
    pub fn ideal_duration_s(&self) -> S {
        S::from_u64(self.steps_total).unwrap_or_else(S::infinity) * self.step_interval_s
    }

    /// Time of step `n` (1-based) when the schedule starts at `start_s`.
    pub fn step_time(&self, start_s: S, n: u64) -> S {
        start_s + S::from_u64(n).unwrap_or_else(S::infinity) * self.step_interval_s
    }
}

pub fn plan_schedule<S: Scalar>(volume_ml: S, rate_ml_h: S, k: &Kinematics<S>) -> Result<StepSchedule<S>> {
    Ok(StepSchedule {
        steps_total: k.volume_to_steps(volume_ml)?,
        step_interval_s: k.rate_to_step_interval(rate_ml_h)?,
    })
}
