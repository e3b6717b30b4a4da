//! Denoising diffusion over planogram grids.
//!
//! The forward process noises a clean grid `x₀` into
//! `x_t = √ᾱ_t x₀ + √(1−ᾱ_t) ε`; a small U-Net learns to predict `ε`, and
//! ancestral sampling runs the learned reverse chain from pure noise.
//! Training adds the constraint hinge penalty and a revenue term, both
//! evaluated on the reconstruction `x̂₀` from the predicted noise.

mod checkpoint;
mod model;
mod sample;
mod schedule;
mod train;

pub use checkpoint::{quantize, Checkpoint, Precision, QuantizationReport, TensorQuantization};
pub use model::{DenoiserModel, ModelConfig};
pub use sample::{sample, sample_across, sample_grids};
pub use schedule::{build_schedule, forward_sample, predict_x0, NoiseSchedule, ScheduleConfig};
pub use train::{
    loss_graph, train_step, LossBreakdown, LossContext, LossVars, StepInputs, TrainConfig, Trainer, TrainingExample,
    TrainingSet,
};

use crate::constraints::ConstraintError;
use crate::domain::DomainError;
use crate::numerics::NumericsError;

#[derive(Debug, thiserror::Error)]
pub enum DiffusionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(
        "non-finite loss at step {step}: diffusion {diffusion}, constraint {constraint}, revenue {revenue}"
    )]
    NonFiniteLoss {
        step: usize,
        diffusion: f64,
        constraint: f64,
        revenue: f64,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}
