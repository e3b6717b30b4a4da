//! Revenue objective, space utilization, and run reports.

mod report;
mod revenue;

pub use report::{build_report, space_utilization, RunReport, Summary, Tally};
pub use revenue::{expected_revenue, revenue_graph, revenue_scale, RevenueModel};

use crate::constraints::ConstraintError;
use crate::domain::DomainError;

#[derive(Debug, thiserror::Error)]
pub enum EvaluationError {
    #[error("invalid revenue model: {0}")]
    InvalidModel(String),
    #[error("report needs at least one sample")]
    EmptySamples,
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
