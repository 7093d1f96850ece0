//! Invertible network building blocks: squeeze, 1×1 channel mixing,
//! conditional affine coupling, feature nets, condition codes and losses.
//! Inference and verification only.

mod condition;
mod conv;
mod coupling;
mod features;
mod loss;
mod mixer;
mod network;
mod tensor;
mod weights;

pub use condition::{
    encode_condition, ConditionCode, CONDITION_BITS, DISTANCE_MAX_MM, DISTANCE_MIN_MM,
    DISTANCE_STEP_MM, LATTICE_SIZE,
};
pub use conv::{leaky_relu, relu, Conv2d, ParamFn, ParamFnMut, ResBlock};
pub use coupling::{Coupling, Subnet, SubnetSpec, PSI_CLAMP};
pub use features::{FeatureNet, FeatureSpec};
pub use loss::{
    feature_extractors, l1, laplacian, loss_edge, loss_forward, loss_perceptual, loss_reverse,
    loss_total, FeatureExtractor, IdentityExtractor, LossTerms, LossWeights, MeanPool2,
};
pub use mixer::{ChannelMixer, MIN_DETERMINANT};
pub use network::{ConditionalInn, Init, InnConfig, InvBlock, NamedTensor};
pub use tensor::{squeeze, unsqueeze, Real, Tensor3};
pub use weights::{
    decode_weights, encode_weights, load_weights, save_weights, CINN_MAGIC, CINN_VERSION,
};

use thiserror::Error;

use crate::error::ErrorClass;

#[derive(Debug, Error)]
pub enum InnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("coupling needs an even channel count, got {0}")]
    OddChannels(usize),
    #[error("squeeze needs even height and width, got {height}×{width}")]
    OddSpatial { height: usize, width: usize },
    #[error("mixing matrix is singular (det = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("condition: {0}")]
    Condition(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("malformed weight file: {0}")]
    WeightFormat(String),
}

impl InnError {
    pub fn class(&self) -> ErrorClass {
        match self {
            InnError::SingularMatrix { .. } => ErrorClass::Numeric,
            InnError::WeightFormat(_) => ErrorClass::Io,
            _ => ErrorClass::Validation,
        }
    }
}
