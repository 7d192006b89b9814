//! Precomputed word vectors read from a text file.
//!
//! Format: a header line `dim N`, then one `word v1 ... vN` row per line.
//! Blank lines are ignored.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// What to do for a word that has no vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fallback {
    #[default]
    Error,
    ZeroVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    pub fallback: Fallback,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            fallback: Fallback::Error,
        }
    }

    pub fn with_fallback(mut self, fallback: Fallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Returns the previous vector if `word` was already present.
    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f32>) -> Result<Option<Vec<f32>>, ModelError> {
        if vector.len() != self.dim {
            return Err(ModelError::Config(format!(
                "vector has {} values, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        Ok(self.vectors.insert(word.into(), vector))
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Applies the fallback policy for missing words.
    pub fn lookup(&self, word: &str) -> Result<Vec<f32>, ModelError> {
        match (self.get(word), self.fallback) {
            (Some(v), _) => Ok(v.to_vec()),
            (None, Fallback::ZeroVector) => Ok(vec![0.0; self.dim]),
            (None, Fallback::Error) => Err(ModelError::MissingEmbedding(word.to_string())),
        }
    }

    /// Words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut words: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        words.sort_unstable();
        words
    }

    /// Serializes in the file format, words sorted.
    pub fn to_text(&self) -> String {
        let mut out = format!("dim {}\n", self.dim);
        for word in self.words() {
            out.push_str(word);
            for v in &self.vectors[word] {
                out.push(' ');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| ModelError::io(path, e))
    }
}

pub fn parse_embedding_table(text: &str) -> Result<EmbeddingTable, ModelError> {
    let bad = |line: usize, detail: String| ModelError::Embedding { line, detail };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| bad(1, "missing `dim N` header".into()))?;
    let dim = match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["dim", n] => n
            .parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| bad(1, format!("invalid dimension `{n}`")))?,
        _ => return Err(bad(1, format!("expected `dim N`, found `{header}`"))),
    };
    let mut table = EmbeddingTable::new(dim);
    for (line, raw) in lines {
        let mut fields = raw.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let vector = fields
            .map(|f| {
                f.parse::<f32>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| bad(line, format!("`{f}` is not a finite number")))
            })
            .collect::<Result<Vec<f32>, _>>()?;
        if vector.len() != dim {
            return Err(bad(line, format!("{} values, expected {dim}", vector.len())));
        }
        if table.insert(word, vector)?.is_some() {
            log::warn!("embedding line {line}: duplicate word `{word}`, keeping the later vector");
        }
    }
    Ok(table)
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
    parse_embedding_table(&text)
}
