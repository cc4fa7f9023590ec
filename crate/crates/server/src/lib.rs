//! The network layer: login and index APIs for devices, physician endpoints
//! for limits, proposals and history, and a JSON-lines journal underneath.

pub mod config;
pub mod error;
pub mod http;
pub mod journal;
pub mod seed;
pub mod service;

pub use config::ServerConfig;
pub use error::{ApiError, ApiResult};
pub use http::{router, serve, ServerHandle};
pub use service::{NewPatient, NewPhysician, Service, StateSnapshot};
