//! Physician limit enforcement.

use std::fmt;

use crate::error::{CoreError, Result};
use crate::model::{PatientProfile, Prescription};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitField {
    VolumeMl,
    RateMlH,
}

impl LimitField {
    pub fn as_str(self) -> &'static str {
        match self {
            LimitField::VolumeMl => "volume_ml",
            LimitField::RateMlH => "rate_ml_h",
        }
    }
}

/// The field(s) of a prescription that exceed the profile limits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub fields: Vec<LimitField>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.fields.iter().map(|x| x.as_str()).collect();
        write!(f, "exceeds limit: {}", names.join(", "))
    }
}

/// Checks a volume/rate pair against a profile. Bounds are inclusive.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn check_limits(volume_ml: f64, rate_ml_h: f64, profile: &PatientProfile) -> Option<Violation> {
    let mut fields = Vec::new();
    // `!(a <= b)` so NaN counts as a violation
    if !(volume_ml <= profile.max_volume_ml) {
        fields.push(LimitField::VolumeMl);
    }
    if !(rate_ml_h <= profile.max_rate_ml_h) {
        fields.push(LimitField::RateMlH);
    }
    (!fields.is_empty()).then_some(Violation { fields })
}

/// `Ok(None)` when the prescription is within the profile limits,
/// `Ok(Some(violation))` otherwise. A patient mismatch is an error, never ok.
pub fn validate_prescription(p: &Prescription, profile: &PatientProfile) -> Result<Option<Violation>> {
    if p.patient_id != profile.patient_id {
        return Err(CoreError::PatientMismatch {
            prescription: p.patient_id.clone(),
            profile: profile.patient_id.clone(),
        });
    }
    Ok(check_limits(p.volume_ml, p.rate_ml_h, profile))
}
