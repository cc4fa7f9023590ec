//! JSON bodies of the HTTP API, shared by the server and its clients.

use serde::{Deserialize, Serialize};

use crate::model::{AdjustmentProposal, InfusionRecord, PatientProfile, Prescription};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
    /// Required for device accounts, absent for physicians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginResponse {
    pub first_name: String,
    pub last_name: String,
    pub institute: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRequest {
    pub patient_id: String,
}

/// Prescription as seen by the pump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfusionIndex {
    pub prescription_id: String,
    pub version: u64,
    pub volume_ml: f64,
    pub rate_ml_h: f64,
}

impl From<&Prescription> for InfusionIndex {
    fn from(p: &Prescription) -> Self {
        Self {
            prescription_id: p.prescription_id.clone(),
            version: p.version,
            volume_ml: p.volume_ml,
            rate_ml_h: p.rate_ml_h,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexResponse {
    pub infusion_index: InfusionIndex,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenResponse {
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsRequest {
    pub max_volume_ml: f64,
    pub max_rate_ml_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitsResponse {
    pub profile: PatientProfile,
    /// Set when the active prescription exceeds the new limits.
    pub warning: Option<String>,
    /// Pending proposals rejected because they violate the new limits.
    pub auto_rejected: Vec<String>,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRequest {
    pub patient_id: String,
    pub volume_ml: f64,
    pub rate_ml_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Approve,
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    pub decision: Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionResponse {
    pub proposal: AdjustmentProposal,
    /// The active prescription after the decision.
    pub active: Option<InfusionIndex>,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub patient_id: String,
    pub records: Vec<InfusionRecord>,
    pub token: String,
}

/// Server-side estimate of the running infusion, from the linear schedule
/// implied by the index fetches the device has made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveInfusion {
    pub version: u64,
    pub delivered_volume_ml: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusResponse {
    pub patient_id: String,
    pub profile: PatientProfile,
    pub active: Option<InfusionIndex>,
    pub live: Option<LiveInfusion>,
    /// All proposals for the patient in creation order.
    pub proposals: Vec<AdjustmentProposal>,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub poll_interval_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn login_response_has_exactly_four_fields() {
        let r = LoginResponse {
            first_name: "Ada".into(),
            last_name: "Pump".into(),
            institute: "KNTU".into(),
            token: "ab".repeat(32),
        };
        let v = serde_json::to_value(&r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["first_name", "institute", "last_name", "token"]);
    }

    #[test]
    fn physician_login_omits_mac() {
        let r = LoginRequest {
            username: "doc1".into(),
            password: "pw".into(),
            mac: None,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"username":"doc1","password":"pw"}"#
        );
    }

    #[test]
    fn index_response_layout() {
        let json =
            r#"{"infusion_index":{"prescription_id":"rx-1","version":1,"volume_ml":2.0,"rate_ml_h":4.0},"token":"t"}"#;
        let r: IndexResponse = serde_json::from_str(json).unwrap();
        assert_eq!(r.infusion_index.version, 1);
        assert_eq!(serde_json::to_string(&r).unwrap(), json);
    }

    #[test]
    fn decision_values() {
        let d: DecisionRequest = serde_json::from_str(r#"{"decision":"approve"}"#).unwrap();
        assert_eq!(d.decision, Decision::Approve);
        assert!(serde_json::from_str::<DecisionRequest>(r#"{"decision":"maybe"}"#).is_err());
    }
}
