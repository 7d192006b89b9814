//! A small dense-tensor engine with reverse-mode differentiation.
//!
//! [`Graph`] records operations during the forward pass; parameters live
//! in a [`ParamStore`] and receive gradients from [`Graph::backward`].
//! Layers in [`layers`] compose graph operations, [`Adam`] updates the
//! store, and [`grad_check`] compares analytic gradients to central
//! finite differences.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod layers;
mod params;
mod tensor;

use std::path::PathBuf;

use thiserror::Error;

pub use adam::Adam;
pub use gradcheck::{grad_check, grad_check_with_reference, GradCheckOptions, GradCheckReport};
pub use graph::{Graph, NodeId};
pub use layers::{Ctx, Mode};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::{Scalar, Tensor};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("{op}: shape mismatch: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: empty input")]
    EmptyInput { op: &'static str },
    #[error("dropout probability {0} outside [0, 1)")]
    InvalidProbability(f64),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite gradient for parameter `{0}`")]
    NonFiniteGradient(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl NnError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        NnError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}
