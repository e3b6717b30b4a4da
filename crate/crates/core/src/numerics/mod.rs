//! Small dense tensors with tape-based reverse-mode differentiation.
//!
//! Everything runs in `f64` on the CPU. Broadcasting is limited to
//! [`OpKind::AddBias`]; other binary ops need identical shapes.

mod gradcheck;
mod graph;
mod kernels;
mod ops;
mod optim;
mod tensor;

pub use gradcheck::grad_check;
pub use graph::{Gradients, Graph, Params, Var};
pub use ops::{forward as forward_op, Activation, OpKind};
pub use optim::{clip_grad_norm, cosine_lr, Adam};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum NumericsError {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: String,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid tensor shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("shape {shape:?} does not match data length {len}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("non-finite value at index {index} ({context})")]
    NonFinite { context: String, index: usize },
    #[error("{op} expects {expected} inputs, got {got}")]
    Arity {
        op: String,
        expected: usize,
        got: usize,
    },
    #[error("loss must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("{0}")]
    InvalidArgument(String),
}
