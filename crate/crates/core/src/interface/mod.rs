//! Command-line pipeline and the HTTP service.

pub mod cli;
pub mod service;

pub use service::{router, serve, ModelSnapshot, ServiceConfig, ServiceError, ServiceState};
