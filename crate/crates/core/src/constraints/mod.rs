//! Retail constraints: hard validators, signed margins, and the hinge penalty.
//!
//! Every constraint maps a planogram to a signed margin scaled so that
//! typical violations are of order one. A constraint is satisfied exactly
//! when its margin is nonnegative. The same margins are available on the
//! autodiff graph for a batch of continuous `[N, C, S, K]` grids.

mod layout;
mod margins;
mod report;
mod spec;
mod tensor;

pub use margins::{hinge_from_margins, hinge_loss, margin, margins, satisfied};
pub use report::{validate, validate_batch, ConstraintOutcome, ValidationReport};
pub use spec::{BrandContract, Constraint, ConstraintKind, ConstraintParams, ConstraintSet, DEFAULT_GROUPING_THRESHOLD};
pub use tensor::{batch_dims as check_batch_shape, freeze_layouts, hinge_graph, hinge_loss_tensor, margins_graph, margins_tensor};

use crate::domain::DomainError;
use crate::numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum ConstraintError {
    #[error("unknown constraint kind `{0}`")]
    UnknownKind(String),
    #[error("invalid params for {kind}: {message}")]
    InvalidParams { kind: ConstraintKind, message: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
