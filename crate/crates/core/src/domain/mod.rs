//! Products, fixtures, planograms, and their tensor encoding.

mod catalog;
pub mod codec;
pub mod io;
pub(crate) mod planogram;

pub use catalog::{Catalog, Product};
pub use codec::{decode, decode_layout, encode, ChannelNorm, DecodedLayout, PlanogramTensor};
pub use planogram::{Fixture, Placement, Planogram, ShelfSpec, StructuralViolation};

use crate::numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum DomainError {
    #[error("invalid records: {}", .0.join(" | "))]
    InvalidRecords(Vec<String>),
    #[error("duplicate sku `{0}`")]
    DuplicateSku(String),
    #[error("structural violations: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Structure(Vec<StructuralViolation>),
    #[error("tensor shape mismatch: expected {expected:?}, got {got} values")]
    ShapeMismatch { expected: Vec<usize>, got: usize },
    #[error("parse error at line {line}{}: {message}", .field.as_ref().map(|f| format!(" field `{f}`")).unwrap_or_default())]
    Parse {
        line: usize,
        field: Option<String>,
        message: String,
    },
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
