//! Core domain of the mediflow infusion system.
//!
//! Holds the records shared by server and device, the physician-limit check,
//! and the scalar-generic math that turns a prescription into a stepper
//! schedule and a schedule into scale-observable drops. The generic types
//! live in their modules; the `f64` aliases below are what the rest of the
//! workspace uses.

pub mod accuracy;
pub mod clock;
pub mod dispense;
pub mod error;
pub mod kinematics;
pub mod mac;
pub mod model;
pub mod scalar;
pub mod schedule;
pub mod validate;
pub mod wire;

pub use error::{CoreError, Result};
pub use mac::MacAddress;
pub use model::{
    AdjustmentProposal, DeviceIdentity, InfusionOutcome, InfusionRecord, PatientProfile, Prescription,
    PrescriptionStatus, ProposalState, Role, Timestamp, UserAccount,
};
pub use scalar::Scalar;
pub use validate::{check_limits, validate_prescription, LimitField, Violation};

pub type SyringeKinematics = kinematics::Kinematics<f64>;
pub type SyringeKinematicsF32 = kinematics::Kinematics<f32>;
pub type StepSchedule = schedule::StepSchedule<f64>;
pub type NoiseModel = dispense::NoiseModel<f64>;
pub type NoiseDraw = dispense::NoiseDraw<f64>;
pub type Dispenser = dispense::Dispenser<f64>;
pub type DropEvent = dispense::DropEvent<f64>;
pub type InfusionTrace = dispense::InfusionTrace<f64>;

pub use dispense::DEFAULT_DROP_QUANTUM_UL;
pub use schedule::plan_schedule;
