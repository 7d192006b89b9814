use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const DEFAULT_MAX_WORD_LEN: usize = 24;

/// Character inventory. Index 0 is padding, 1 stands for any character
/// not seen when the vocabulary was built, real characters follow in
/// sorted order from 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct CharVocab {
    index: BTreeMap<char, usize>,
    max_word_len: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    chars: String,
    max_word_len: usize,
}

impl TryFrom<VocabRepr> for CharVocab {
    type Error = ModelError;

    fn try_from(repr: VocabRepr) -> Result<Self, ModelError> {
        let chars: Vec<char> = repr.chars.chars().collect();
        let unique: BTreeSet<char> = chars.iter().copied().collect();
        if unique.len() != chars.len() {
            return Err(ModelError::Config("vocabulary repeats a character".into()));
        }
        CharVocab::with_order(chars, repr.max_word_len)
    }
}

impl From<CharVocab> for VocabRepr {
    fn from(vocab: CharVocab) -> Self {
        VocabRepr {
            chars: vocab.chars().collect(),
            max_word_len: vocab.max_word_len,
        }
    }
}

impl CharVocab {
    /// Every distinct character of `words`, sorted.
    pub fn from_words<'a>(
        words: impl IntoIterator<Item = &'a str>,
        max_word_len: usize,
    ) -> Result<Self, ModelError> {
        let chars: BTreeSet<char> = words.into_iter().flat_map(str::chars).collect();
        Self::with_order(chars, max_word_len)
    }

    /// Assigns indices 2, 3, ... in the order given.
    pub fn with_order(
        chars: impl IntoIterator<Item = char>,
        max_word_len: usize,
    ) -> Result<Self, ModelError> {
        if max_word_len == 0 {
            return Err(ModelError::Config("max_word_len must be positive".into()));
        }
        let index = chars
            .into_iter()
            .enumerate()
            .map(|(i, c)| (c, i + 2))
            .collect();
        Ok(CharVocab {
            index,
            max_word_len,
        })
    }

    /// Builds from an explicit map. Indices must be exactly `2..2+n`.
    pub fn from_map(index: BTreeMap<char, usize>, max_word_len: usize) -> Result<Self, ModelError> {
        let used: BTreeSet<usize> = index.values().copied().collect();
        if used.len() != index.len() || used.iter().copied().ne(2..2 + index.len()) {
            return Err(ModelError::Config(
                "character indices must be contiguous from 2".into(),
            ));
        }
        if max_word_len == 0 {
            return Err(ModelError::Config("max_word_len must be positive".into()));
        }
        Ok(CharVocab {
            index,
            max_word_len,
        })
    }

    /// Number of indices including PAD and UNK.
    pub fn size(&self) -> usize {
        self.index.len() + 2
    }

    pub fn max_word_len(&self) -> usize {
        self.max_word_len
    }

    pub fn get(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK)
    }

    /// Characters in index order.
    pub fn chars(&self) -> impl Iterator<Item = char> + '_ {
        let mut pairs: Vec<(usize, char)> = self.index.iter().map(|(&c, &i)| (i, c)).collect();
        pairs.sort_unstable();
        pairs.into_iter().map(|(_, c)| c)
    }

    /// Indices of the first `max_word_len` characters followed by PAD up
    /// to `max_word_len`.
    pub fn encode(&self, word: &str) -> Result<Vec<usize>, ModelError> {
        encode_word(word, self)
    }
}

pub fn encode_word(word: &str, vocab: &CharVocab) -> Result<Vec<usize>, ModelError> {
    if word.is_empty() {
        return Err(ModelError::EmptyWord);
    }
    let mut ids: Vec<usize> = word
        .chars()
        .take(vocab.max_word_len)
        .map(|c| vocab.get(c))
        .collect();
    ids.resize(vocab.max_word_len, PAD);
    Ok(ids)
}

/// Unpadded length as seen by the models.
pub fn encoded_len(word: &str, vocab: &CharVocab) -> usize {
    word.chars().count().min(vocab.max_word_len)
}
