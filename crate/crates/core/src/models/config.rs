use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::DEFAULT_HASH_DIM;
use super::vocab::DEFAULT_MAX_WORD_LEN;
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    LogReg,
    LstmAttn,
    BiLstmAttn,
    Cnn,
    CnnLstm,
    CnnBiLstm,
    ExtEmbLstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::LogReg,
        ModelKind::LstmAttn,
        ModelKind::BiLstmAttn,
        ModelKind::Cnn,
        ModelKind::CnnLstm,
        ModelKind::CnnBiLstm,
        ModelKind::ExtEmbLstm,
    ];

    /// Command-line name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LogReg => "logreg",
            ModelKind::LstmAttn => "lstm-attn",
            ModelKind::BiLstmAttn => "bilstm-attn",
            ModelKind::Cnn => "cnn",
            ModelKind::CnnLstm => "cnn-lstm",
            ModelKind::CnnBiLstm => "cnn-bilstm",
            ModelKind::ExtEmbLstm => "ext-emb-lstm",
        }
    }

    /// Row label used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::LogReg => "Logistic Regression",
            ModelKind::LstmAttn => "LSTM with attention",
            ModelKind::BiLstmAttn => "BiLSTM with attention",
            ModelKind::Cnn => "CNN",
            ModelKind::CnnLstm => "CNN + LSTM",
            ModelKind::CnnBiLstm => "CNN + BiLSTM",
            ModelKind::ExtEmbLstm => "External embeddings + LSTM",
        }
    }

    pub fn uses_chars(self) -> bool {
        !matches!(self, ModelKind::LogReg | ModelKind::ExtEmbLstm)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        let folded: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_'))
            .flat_map(char::to_lowercase)
            .collect();
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().replace('-', "") == folded)
            .ok_or_else(|| ModelError::UnknownModelKind(s.to_string()))
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub char_embed_dim: usize,
    pub hidden: usize,
    pub dense: usize,
    pub dropout: f64,
    pub leaky_alpha: f64,
    pub cnn_filters: usize,
    pub cnn_kernels: Vec<usize>,
    pub classes: usize,
    pub ext_embed_dim: usize,
    pub max_word_len: usize,
    pub hash_dim: usize,
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            char_embed_dim: 64,
            hidden: 128,
            dense: 768,
            dropout: 0.1,
            leaky_alpha: 0.01,
            cnn_filters: 64,
            cnn_kernels: vec![2, 3, 4],
            classes: 3,
            ext_embed_dim: 768,
            max_word_len: DEFAULT_MAX_WORD_LEN,
            hash_dim: DEFAULT_HASH_DIM,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.classes != 3 {
            return fail(format!("classes must be 3, got {}", self.classes));
        }
        for (name, v) in [
            ("char_embed_dim", self.char_embed_dim),
            ("hidden", self.hidden),
            ("dense", self.dense),
            ("cnn_filters", self.cnn_filters),
            ("ext_embed_dim", self.ext_embed_dim),
            ("max_word_len", self.max_word_len),
            ("hash_dim", self.hash_dim),
        ] {
            if v == 0 {
                return fail(format!("{name} must be positive"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !self.leaky_alpha.is_finite() || self.leaky_alpha < 0.0 {
            return fail(format!("leaky_alpha {} must be finite and non-negative", self.leaky_alpha));
        }
        if self.cnn_kernels.is_empty() || self.cnn_kernels.contains(&0) {
            return fail("cnn_kernels must be a non-empty list of positive sizes".into());
        }
        Ok(())
    }

    /// Sets one field from its textual form, as used in config files.
    /// Returns `false` for keys this config does not own.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ModelError> {
        match key {
            "kind" | "model" => self.kind = value.parse()?,
            "char_embed_dim" => self.char_embed_dim = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "dense" => self.dense = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "leaky_alpha" => self.leaky_alpha = parse_value(key, value)?,
            "cnn_filters" => self.cnn_filters = parse_value(key, value)?,
            "cnn_kernels" => {
                self.cnn_kernels = value
                    .split(',')
                    .map(|k| parse_value(key, k.trim()))
                    .collect::<Result<_, _>>()?
            }
            "classes" => self.classes = parse_value(key, value)?,
            "ext_embed_dim" => self.ext_embed_dim = parse_value(key, value)?,
            "max_word_len" => self.max_word_len = parse_value(key, value)?,
            "hash_dim" => self.hash_dim = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
}

/// Epoch range used for the reported experiments; values outside it are
/// accepted with a warning.
pub const RECOMMENDED_EPOCHS: std::ops::RangeInclusive<usize> = 10..=30;

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 20,
            batch_size: 128,
            lr: 0.001,
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !RECOMMENDED_EPOCHS.contains(&self.epochs) {
            log::warn!(
                "epochs = {} is outside the usual {}..={} range",
                self.epochs,
                RECOMMENDED_EPOCHS.start(),
                RECOMMENDED_EPOCHS.end()
            );
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, ModelError> {
        match key {
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "shuffle_each_epoch" => self.shuffle_each_epoch = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, ModelError> {
    value
        .parse()
        .map_err(|_| ModelError::Config(format!("invalid value `{value}` for `{key}`")))
}
