//! HTTP service and admin CLI for the clinic system.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;

pub use api::{router, ENDPOINTS, SESSION_HEADER};
pub use config::ServiceConfig;
pub use error::{ApiError, ErrorBody};
