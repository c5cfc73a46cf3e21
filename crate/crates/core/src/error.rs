use std::io;

use thiserror::Error;

/// Errors produced anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("non-scalar root: backward needs a single-element tensor, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),

    #[error("tensor id {0} is not on this tape")]
    UnknownTensor(usize),

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("layer `{layer}` is not spatial (shape {shape:?}); CAM needs (K, s, s)")]
    NonSpatialLayer { layer: String, shape: Vec<usize> },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint: bad magic bytes")]
    BadMagic,

    #[error("checkpoint: version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("checkpoint: file truncated while reading {context}")]
    Truncated { context: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("ppm: {0}")]
    Ppm(String),

    #[error("cifar10: file length {len} is not a multiple of 3073; trailing record starts at byte offset {offset}")]
    CifarLength { len: usize, offset: usize },

    #[error("explainer failed on draw {draw}: {source}")]
    Explainer {
        draw: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Shape {
        op,
        detail: detail.into(),
    }
}
