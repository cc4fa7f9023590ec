use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoreError {
    #[error("invalid MAC address {0:?}")]
    InvalidMac(String),

    #[error("volume must be finite and non-negative, got {0}")]
    InvalidVolume(f64),

    #[error("rate must be finite and strictly positive, got {0}")]
    InvalidRate(f64),

    #[error("invalid syringe geometry: {0}")]
    InvalidKinematics(&'static str),

    #[error("prescription for patient {prescription} checked against profile of patient {profile}")]
    PatientMismatch { prescription: String, profile: String },

    #[error("invalid noise model: {0}")]
    InvalidNoise(&'static str),
}

pub type Result<T, E = CoreError> = std::result::Result<T, E>;
