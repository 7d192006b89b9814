//! Seeded generator for labeled toy corpora.
//!
//! Words are a random stem of one to three syllables plus an ending.
//! Stems come from one inventory shared by all classes, so only the
//! endings carry the signal: each language has its own set, and words
//! common to both use a third, neutral set. A `noise` fraction of words
//! takes its ending from a random class instead, which keeps held-out
//! scores away from the ceiling.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, LabeledWord, Tag};

const ONSETS: &[&str] = &[
    "b", "d", "g", "h", "k", "l", "m", "n", "s", "t", "w", "y", "x", "ch", "sh", "ts", "dd", "ll",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "aa", "ee", "ii", "oo"];
const WAL_ENDINGS: &[&str] = &["iis", "aappe", "uwa", "ida", "aa", "asi", "ees", "ana"];
const GOF_ENDINGS: &[&str] = &["ethay", "ssafe", "tte", "ey", "ayssi", "oy", "iyo", "etti"];
const SHARED_ENDINGS: &[&str] = &["idi", "ara", "on", "uu", "ido", "ita", "an", "iya"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub size: usize,
    /// Share of words common to both languages (`wal-gof`), in `[0, 1]`.
    pub overlap: f64,
    /// Share of words whose ending is drawn from a random class.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(size: usize, overlap: f64, seed: u64) -> Self {
        SyntheticSpec {
            size,
            overlap,
            noise: 0.1,
            seed,
        }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    /// Words per class: `[wal, gof, wal-gof]`.
    pub fn class_sizes(&self) -> [usize; 3] {
        let shared = (self.size as f64 * self.overlap).round() as usize;
        let rest = self.size - shared.min(self.size);
        [rest.div_ceil(2), rest / 2, shared.min(self.size)]
    }
}

fn endings(tag: Tag) -> &'static [&'static str] {
    match tag {
        Tag::Wal => WAL_ENDINGS,
        Tag::Gof => GOF_ENDINGS,
        Tag::WalGof => SHARED_ENDINGS,
    }
}

fn stem(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(1..=3);
    (0..syllables)
        .map(|_| {
            let onset = ONSETS.choose(rng).expect("non-empty");
            let vowel = VOWELS.choose(rng).expect("non-empty");
            format!("{onset}{vowel}")
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec) -> Result<Corpus, CorpusError> {
    for (name, v) in [("overlap", spec.overlap), ("noise", spec.noise)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CorpusError::InvalidSetting(format!("{name} = {v}")));
        }
    }
    if spec.size == 0 {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut seen = BTreeSet::new();
    let mut items = Vec::with_capacity(spec.size);
    for (tag, count) in Tag::ALL.into_iter().zip(spec.class_sizes()) {
        let mut made = 0;
        let mut attempts = 0;
        while made < count {
            attempts += 1;
            if attempts > 1000 * (count + 1) {
                return Err(CorpusError::InvalidSetting(format!(
                    "cannot draw {count} distinct {tag} words"
                )));
            }
            let source = if rng.random::<f64>() < spec.noise {
                *Tag::ALL.choose(&mut rng).expect("non-empty")
            } else {
                tag
            };
            let word = stem(&mut rng) + endings(source).choose(&mut rng).expect("non-empty");
            if seen.insert(word.clone()) {
                items.push(LabeledWord::new(word, tag));
                made += 1;
            }
        }
    }
    items.shuffle(&mut rng);
    let mut corpus = Corpus::new(format!("synthetic-{}", spec.seed), items);
    corpus.seed = Some(spec.seed);
    Ok(corpus)
}
