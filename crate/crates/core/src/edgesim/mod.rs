//! Discrete-event model of the serverless inference layer.
//!
//! Warm latency grows with the number of requests in flight; a request that
//! finds no idle container pays a cold start on a fresh one. Provisioned
//! containers are always warm.

mod latency;
mod sim;

pub use latency::{steady_latency, table2, LatencyModel, ProfileMode, Table2Row, TABLE2_CONCURRENCY};
pub use sim::{run_load, Arrival, LoadScenario, LoadStats};

#[derive(Debug, thiserror::Error)]
pub enum EdgesimError {
    #[error("invalid latency model: {0}")]
    InvalidModel(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
