//! Keyless token authorization: opaque one-time tokens looked up server-side,
//! plus salted password hashing for the login step.

pub mod error;
pub mod password;
pub mod token;

pub use error::TokenError;
pub use password::{hash_password, verify_password};
pub use token::{AuthToken, TokenStore, DEFAULT_TTL_SECS};
