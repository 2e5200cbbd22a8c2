//! Dense f64 tensors with reverse-mode differentiation, and the
//! convolution / residual / self-attention recommender built on them.

mod autograd;
mod model;
mod optim;
mod train;
mod weights;

#[cfg(test)]
mod tests;

use thiserror::Error;

pub use autograd::{bce_value, sigmoid, BatchStats, Graph, Tensor, Var, BN_EPS};
pub use model::{
    add_attention, add_residual_block, Ablation, ArchConfig, Ctx, Forward, Param, ParamStore, RecommenderNet, BN_MOMENTUM,
};
pub use optim::Adam;
pub use train::{
    cross_validate, fit, fold_assignment, infer, predict, score_logits, train, CurvePoint, CvOutcome, LearningCurves,
    Prediction, Sample, Split, TrainConfig,
};
pub use weights::{read_weights, write_weights};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("targets must lie in [0, 1]")]
    InvalidTarget,
    #[error("nothing to train on")]
    EmptyRepository,
    #[error("fold assignment is not a partition of the samples")]
    InvalidFolds,
    #[error("missing parameter {0}")]
    MissingParam(String),
    #[error("unknown ablation {0:?} (expected full, no-cnn, no-resnet or no-atn)")]
    UnknownAblation(String),
    #[error("bad weight file: {0}")]
    BadWeights(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
