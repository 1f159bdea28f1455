//! Cell recognition network: a 10-conv residual feature extractor without
//! global pooling, two bidirectional LSTM layers and a 13-way projection
//! feeding CTC.

mod forward;
mod input;
pub mod manifest;
mod weights;

pub use forward::{fold_columns, forward, forward_batch, residual_block, BN_EPS};
pub use input::preprocess_cell;
pub use manifest::{ArchitectureManifest, Layer, TensorSpec, CLASSES, FRAMES, INPUT_HEIGHT, INPUT_WIDTH};
pub use weights::{decode_tensors, decode_weights, encode_tensors, encode_weights, load_weights, save_weights, ModelWeights};

use thiserror::Error;

use crate::ctc::CtcError;
use crate::tensorops::TensorError;

#[derive(Debug, Error)]
pub enum CrnnError {
    #[error("not a CRNW weight file")]
    BadMagic,
    #[error("unsupported CRNW version {0}")]
    UnsupportedVersion(u32),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    ExtraTensor(String),
    #[error("tensor {0} appears twice")]
    DuplicateTensor(String),
    #[error("tensor {name}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("weight file is truncated")]
    TruncatedFile,
    #[error("{0} unexpected bytes after the last tensor")]
    TrailingData(usize),
    #[error("tensor name is not valid UTF-8")]
    BadName,
    #[error("cell image is empty")]
    EmptyImage,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Ctc(#[from] CtcError),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}
