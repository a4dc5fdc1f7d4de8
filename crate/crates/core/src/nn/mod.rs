//! Sentence CNN: one convolution layer over the sentence matrix, max-over-time
//! pooling, two ReLU dense layers with inverted dropout, and a softmax output.
//! Gradients are derived by hand and trained with Adam.
//!
//! Every type is generic over [`Scalar`] so the same code runs in `f64`
//! (reproducible, used for gradient checks) or `f32` (faster).

mod adam;
mod config;
mod layers;
mod model;
mod params;
mod train;

use std::fmt::Debug;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, ToPrimitive};

pub use adam::{adam_step, adam_update, AdamHyper, AdamState};
pub use config::CnnConfig;
pub use layers::{conv_forward, max_pool_over_time, softmax_in_place};
pub(crate) use model::argmax_row;
pub use model::{CnnModel, ForwardTrace, MODEL_MAGIC, MODEL_VERSION};
pub use params::CnnParams;
pub use train::{accuracy, train_cnn, write_loss_trace, LossPoint, TrainedCnn, LOSS_TRACE_EVERY};

/// Floating-point element type of a network.
pub trait Scalar:
    LinalgScalar
    + ScalarOperand
    + Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Whether dropout is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Lower clamp applied to the true-class probability before taking its log.
pub const LOG_CLAMP: f64 = 1e-12;
