//! The seven word classifiers, their inputs and the training loop.

mod config;
mod embedding;
mod features;
mod model;
mod train;
mod vocab;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ModelConfig, ModelKind, TrainingConfig, RECOMMENDED_EPOCHS};
pub use embedding::{load_embedding_table, parse_embedding_table, EmbeddingTable, Fallback};
pub use features::{char_ngrams, fnv1a, logreg_features, DEFAULT_HASH_DIM};
pub use model::{argmax, describe, Examples, Forward, Model, Prediction};
pub use train::{
    evaluate_examples, evaluate_loss, evaluate_model, targets, train, EpochRecord, History, Trainer,
};
pub use vocab::{encode_word, encoded_len, CharVocab, DEFAULT_MAX_WORD_LEN, PAD, UNK};

use crate::evaluation::EvalError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("empty word")]
    EmptyWord,
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("unknown model kind `{0}`")]
    UnknownModelKind(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("embedding file line {line}: {detail}")]
    Embedding { line: usize, detail: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("empty corpus: {0}")]
    EmptyCorpus(String),
    #[error("non-finite training loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ModelError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ModelError::Nn(NnError::Io { .. }) | ModelError::Io { .. } => "io",
            ModelError::Nn(NnError::Checkpoint(_)) | ModelError::Checkpoint(_) => "checkpoint",
            ModelError::Nn(_) => "numeric",
            ModelError::Eval(_) => "eval",
            ModelError::EmptyWord => "empty_word",
            ModelError::MissingEmbedding(_) => "missing_embedding",
            ModelError::UnknownModelKind(_) => "unknown_model",
            ModelError::Config(_) => "config",
            ModelError::Embedding { .. } => "embedding_format",
            ModelError::EmptyCorpus(_) => "empty_corpus",
            ModelError::NonFiniteLoss { .. } => "non_finite_loss",
        }
    }
}

#[cfg(test)]
mod tests;
