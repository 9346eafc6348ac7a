//! Core of the skin-cancer clinic information system: domain types, access
//! control, the procedure workflow, billing, encrypted documents, storage and
//! the clinic service that ties them together.

pub mod auth;
pub mod billing;
pub mod clinic;
pub mod documents;
pub mod domain;
pub mod error;
pub mod ids;
pub mod printing;
pub mod store;
pub mod workflow;

pub use auth::{Permission, Role};
pub use clinic::{Clinic, ClinicConfig, Clock, ManualClock, SystemClock};
pub use error::{Error, Result};
pub use store::Store;
