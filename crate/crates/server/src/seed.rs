//! Demo accounts so every mode works out of the box.

use mediflow_core::MacAddress;

use crate::error::ApiResult;
use crate::service::{NewPatient, NewPhysician, Service};

pub const DEMO_PHYSICIAN: &str = "doc1";
pub const DEMO_PASSWORD: &str = "pw";
pub const DEMO_MAX_VOLUME_ML: f64 = 10.0;
pub const DEMO_MAX_RATE_ML_H: f64 = 10.0;

/// Username, patient id and MAC of demo device `n` (1-based, at most 255).
pub fn demo_device(n: u8) -> (String, String, MacAddress) {
    (
        format!("dev{n}"),
        format!("p{n}"),
        MacAddress::new([0xAA, 0xBB, 0xCC, 0xDD, 0xEE, n]),
    )
}

/// Creates `doc1` and devices `dev1..=devN` (MAC `AA:BB:CC:DD:EE:0N`), each
/// with limits 10 mL / 10 mL/h and an active 2 mL at 4 mL/h prescription.
pub fn seed_demo(service: &Service, devices: u8) -> ApiResult<()> {
    service.register_physician(NewPhysician {
        username: DEMO_PHYSICIAN.into(),
        password: DEMO_PASSWORD.into(),
        first_name: "Mehri".into(),
        last_name: "Doctor".into(),
        institute: "Demo Clinic".into(),
    })?;
    for n in 1..=devices.max(1) {
        let (username, patient_id, mac) = demo_device(n);
        service.register_patient(NewPatient {
            username,
            password: DEMO_PASSWORD.into(),
            first_name: "Pat".into(),
            last_name: format!("Ient{n}"),
            institute: "Demo Clinic".into(),
            patient_id: patient_id.clone(),
            mac,
            physician_username: DEMO_PHYSICIAN.into(),
            max_volume_ml: DEMO_MAX_VOLUME_ML,
            max_rate_ml_h: DEMO_MAX_RATE_ML_H,
        })?;
        service.prescribe(&patient_id, 2.0, 4.0)?;
    }
    Ok(())
}
