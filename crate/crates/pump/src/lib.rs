//! Syringe pump simulator.
//!
//! A device logs in with its MAC, fetches its infusion index, turns it into
//! stepper motor steps and drops, polls for changes while it runs, and posts
//! the finished record. Time is simulated unless [`Pacing::Realtime`] is set.

pub mod device;
pub mod fleet;
pub mod phase;
pub mod transport;

pub use device::{
    poll_and_adapt, run_session, ActiveInfusion, Adaptation, DeviceConfig, DeviceState, Pacing, PumpError, Session,
    SessionInfo, SessionReport, Transition, DEFAULT_POLL_INTERVAL_S,
};
pub use fleet::run_fleet;
pub use phase::Phase;
pub use transport::{HttpTransport, LocalTransport, Transport, TransportError, TransportResult};
