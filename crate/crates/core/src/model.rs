//! Records persisted by the server and exchanged with devices.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::mac::MacAddress;

pub type Timestamp = DateTime<Utc>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PatientDevice,
    Physician,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub username: String,
    /// Encoded salted hash; never the plaintext.
    pub password_hash: String,
    pub role: Role,
    pub first_name: String,
    pub last_name: String,
    pub institute: String,
    /// Present iff `role` is [`Role::PatientDevice`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patient_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceIdentity {
    pub mac: MacAddress,
    pub owner_username: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientProfile {
    pub patient_id: String,
    pub max_volume_ml: f64,
    pub max_rate_ml_h: f64,
    pub physician_username: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrescriptionStatus {
    Active,
    Superseded,
}

/// The infusion index: a versioned volume/rate order for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    pub prescription_id: String,
    pub patient_id: String,
    pub version: u64,
    pub volume_ml: f64,
    pub rate_ml_h: f64,
    pub status: PrescriptionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfusionOutcome {
    Completed,
    SupersededMidInfusion,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfusionRecord {
    /// Assigned by the server when the device leaves it empty.
    #[serde(default)]
    pub record_id: Option<String>,
    pub patient_id: String,
    pub prescription_id: String,
    pub version: u64,
    pub started_at: Timestamp,
    pub finished_at: Timestamp,
    pub delivered_volume_ml: f64,
    pub mean_rate_ml_h: f64,
    pub outcome: InfusionOutcome,
}

impl InfusionRecord {
    /// Checks the record-level invariants; returns the reason on failure.
    pub fn check(&self) -> Result<(), &'static str> {
        if self.finished_at < self.started_at {
            return Err("finished_at precedes started_at");
        }
        if !self.delivered_volume_ml.is_finite() || self.delivered_volume_ml < 0.0 {
            return Err("delivered_volume_ml must be finite and non-negative");
        }
        if !self.mean_rate_ml_h.is_finite() || self.mean_rate_ml_h < 0.0 {
            return Err("mean_rate_ml_h must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalState {
    Pending,
    Approved,
    Rejected,
}

/// A dosage change suggested by the decision algorithm, awaiting a physician.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentProposal {
    pub proposal_id: String,
    pub patient_id: String,
    pub proposed_volume_ml: f64,
    pub proposed_rate_ml_h: f64,
    pub state: ProposalState,
    #[serde(default)]
    pub decided_by: Option<String>,
    /// Why a proposal was rejected without a physician (e.g. `limit_exceeded`).
    #[serde(default)]
    pub reason: Option<String>,
    /// Active prescription version when the proposal was created (0 = none).
    pub base_version: u64,
    pub created_at: Timestamp,
    /// Monotone creation sequence; orders proposals created in the same instant.
    pub seq: u64,
}

impl AdjustmentProposal {
    pub fn is_pending(&self) -> bool {
        self.state == ProposalState::Pending
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record() -> InfusionRecord {
        InfusionRecord {
            record_id: None,
            patient_id: "p1".into(),
            prescription_id: "rx-1".into(),
            version: 1,
            started_at: Utc.timestamp_opt(1_000, 0).unwrap(),
            finished_at: Utc.timestamp_opt(2_800, 0).unwrap(),
            delivered_volume_ml: 2.05,
            mean_rate_ml_h: 3.96,
            outcome: InfusionOutcome::Completed,
        }
    }

    #[test]
    fn record_check() {
        assert!(record().check().is_ok());
        let mut r = record();
        r.finished_at = Utc.timestamp_opt(999, 0).unwrap();
        assert!(r.check().is_err());
        let mut r = record();
        r.delivered_volume_ml = -0.1;
        assert!(r.check().is_err());
    }

    #[test]
    fn enums_serialize_snake_case() {
        assert_eq!(
            serde_json::to_string(&InfusionOutcome::SupersededMidInfusion).unwrap(),
            "\"superseded_mid_infusion\""
        );
        assert_eq!(
            serde_json::to_string(&Role::PatientDevice).unwrap(),
            "\"patient_device\""
        );
    }
}
