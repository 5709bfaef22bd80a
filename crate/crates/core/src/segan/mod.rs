//! Desk-scale SEGAN: tensors, 1-D convolutions, a reverse-mode tape, the
//! GAN objectives, RMSProp training and windowed inference.

mod checkpoint;
mod conv;
mod gradcheck;
mod graph;
mod infer;
mod loss;
mod model;
mod optim;
mod tensor;
mod train;

use thiserror::Error;

use crate::audio::AudioError;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use conv::{conv1d_fractional, conv1d_strided};
pub use gradcheck::{check_gradients, GradCheckReport};
pub use graph::{Gradients, Tape, Var};
pub use infer::segan_enhance;
pub use loss::{loss_cgan, loss_gan, loss_lsgan_d, loss_lsgan_g, loss_segan_g, GanBatchLoss};
pub use model::{
    generator_forward, Activation, Architecture, ConvDirection, ConvLayerSpec, GanModel,
    LatentSample,
};
pub use optim::{rmsprop_step, RmsProp, RmsState};
pub use tensor::Tensor;
pub use train::{steps_per_epoch, toy_dataset, train, TrainConfig, TrainOutcome, TrainingWindow};

#[derive(Debug, Error)]
pub enum SeganError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value")]
    NonFinite,
    #[error("value outside the loss domain: {0}")]
    DomainError(String),
    #[error("graph error: {0}")]
    GraphError(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("no trained model available")]
    UntrainedModel,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// `y[n] = x[n] - k x[n-1]`, with `x[-1] = 0`.
pub fn preemphasize(x: &[f64], k: f64) -> Vec<f64> {
    let mut prev = 0.0;
    x.iter()
        .map(|&v| {
            let y = v - k * prev;
            prev = v;
            y
        })
        .collect()
}

/// Inverse of [`preemphasize`]: `x[n] = y[n] + k x[n-1]`.
pub fn deemphasize(y: &[f64], k: f64) -> Vec<f64> {
    let mut prev = 0.0;
    y.iter()
        .map(|&v| {
            prev = v + k * prev;
            prev
        })
        .collect()
}
