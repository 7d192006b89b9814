//! Word-level corpora: cleaning, tokenization, TSV I/O, seeded splits and
//! shared-vocabulary extraction.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language tag of a single word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "wal")]
    Wal,
    #[serde(rename = "gof")]
    Gof,
    #[serde(rename = "wal-gof")]
    WalGof,
}

impl Tag {
    pub const ALL: [Tag; 3] = [Tag::Wal, Tag::Gof, Tag::WalGof];
    pub const COUNT: usize = 3;

    /// Stable label encoding: wal=0, gof=1, wal-gof=2.
    pub fn index(self) -> usize {
        match self {
            Tag::Wal => 0,
            Tag::Gof => 1,
            Tag::WalGof => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Tag> {
        Tag::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Wal => "wal",
            Tag::Gof => "gof",
            Tag::WalGof => "wal-gof",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown tag `{0}` (expected wal, gof or wal-gof)")]
pub struct ParseTagError(pub String);

impl FromStr for Tag {
    type Err = ParseTagError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wal" => Ok(Tag::Wal),
            "gof" => Ok(Tag::Gof),
            "wal-gof" => Ok(Tag::WalGof),
            other => Err(ParseTagError(other.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed line: {detail}")]
    MalformedLine { line: usize, detail: String },
    #[error("line {line}: unknown tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("line {line}: word `{raw}` is empty after cleaning")]
    EmptyWord { line: usize, raw: String },
    #[error("line {line}: word `{raw}` cleans to several tokens")]
    MultiTokenWord { line: usize, raw: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("split ratios must sum to 1, got {sum}")]
    RatioSum { sum: f64 },
    #[error("split ratios must be positive, got {0:?}")]
    InvalidRatio((f64, f64, f64)),
    #[error("invalid generator setting: {0}")]
    InvalidSetting(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// One word together with its gold tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledWord {
    pub word: String,
    pub tag: Tag,
}

impl LabeledWord {
    pub fn new(word: impl Into<String>, tag: Tag) -> Self {
        LabeledWord {
            word: word.into(),
            tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub items: Vec<LabeledWord>,
    /// Seed of the shuffle that produced this partition, if any.
    pub seed: Option<u64>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, items: Vec<LabeledWord>) -> Self {
        Corpus {
            name: name.into(),
            items,
            seed: None,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|item| item.word.as_str())
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.items.iter().map(|item| item.tag).collect()
    }

    pub fn stats(&self) -> TagDistribution {
        stats(self)
    }
}

/// Per-tag counts and fractions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TagDistribution {
    pub counts: [usize; 3],
    pub fractions: [f64; 3],
}

impl TagDistribution {
    pub fn from_tags(tags: impl IntoIterator<Item = Tag>) -> Self {
        let mut counts = [0usize; 3];
        for tag in tags {
            counts[tag.index()] += 1;
        }
        let total: usize = counts.iter().sum();
        let mut fractions = [0.0; 3];
        if total > 0 {
            for (fraction, &count) in fractions.iter_mut().zip(&counts) {
                *fraction = count as f64 / total as f64;
            }
        }
        TagDistribution { counts, fractions }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.counts[tag.index()]
    }

    pub fn fraction(&self, tag: Tag) -> f64 {
        self.fractions[tag.index()]
    }

    /// `{"total": n, "tags": {"wal": {"count":.., "fraction":..}, ...}}`
    pub fn to_json(&self) -> serde_json::Value {
        let mut tags = serde_json::Map::new();
        for tag in Tag::ALL {
            tags.insert(
                tag.to_string(),
                serde_json::json!({"count": self.count(tag), "fraction": self.fraction(tag)}),
            );
        }
        serde_json::json!({"total": self.total(), "tags": tags})
    }
}

impl fmt::Display for TagDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<8} {:>8} {:>8}", "tag", "count", "percent")?;
        for tag in Tag::ALL {
            writeln!(
                f,
                "{:<8} {:>8} {:>7.2}%",
                tag.as_str(),
                self.count(tag),
                100.0 * self.fraction(tag)
            )?;
        }
        write!(f, "{:<8} {:>8}", "total", self.total())
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphabetic() && !c.is_numeric()
}

fn is_apostrophe(c: char) -> bool {
    matches!(c, '\'' | '\u{2019}' | '\u{02BC}')
}

fn is_url(token: &str) -> bool {
    if token.starts_with("www.") {
        return true;
    }
    match token.find("://") {
        Some(pos) if pos > 0 => token[..pos]
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.')),
        _ => false,
    }
}

fn strip_html_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        match rest[open..].find('>') {
            Some(close) => {
                out.push_str(&rest[..open]);
                out.push(' ');
                rest = &rest[open + close + 1..];
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Normalizes raw text into lowercase letter-only words.
///
/// HTML tags and URL tokens are dropped, every character that is not a
/// letter becomes a separator, and an apostrophe survives only between two
/// letters (it marks glottalization in Wolayta/Gofa orthography).
pub fn clean_text(raw: &str) -> String {
    let without_tags = strip_html_tags(raw);
    let mut words: Vec<String> = Vec::new();
    for token in without_tags.split_whitespace() {
        if is_url(&token.to_lowercase()) {
            continue;
        }
        let chars: Vec<char> = token
            .to_lowercase()
            .chars()
            .map(|c| if is_apostrophe(c) { '\'' } else { c })
            .collect();
        let mut current = String::new();
        for (i, &c) in chars.iter().enumerate() {
            if is_word_char(c) {
                current.push(c);
            } else if c == '\''
                && i > 0
                && is_word_char(chars[i - 1])
                && chars.get(i + 1).is_some_and(|&n| is_word_char(n))
            {
                current.push(c);
            } else if !current.is_empty() {
                words.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words.join(" ")
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

/// Parses TSV corpus text (`word<TAB>tag`, `#` comments, blank lines skipped).
pub fn parse_corpus(name: &str, text: &str) -> Result<Corpus, CorpusError> {
    let mut items = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw_line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let columns: Vec<&str> = trimmed.split('\t').collect();
        if columns.len() != 2 {
            return Err(CorpusError::MalformedLine {
                line,
                detail: format!("expected 2 tab-separated columns, found {}", columns.len()),
            });
        }
        let tag: Tag = columns[1].trim().parse().map_err(|_| CorpusError::UnknownTag {
            line,
            tag: columns[1].trim().to_string(),
        })?;
        let cleaned = clean_text(columns[0]);
        let mut tokens = cleaned.split_whitespace();
        let word = match (tokens.next(), tokens.next()) {
            (None, _) => {
                return Err(CorpusError::EmptyWord {
                    line,
                    raw: columns[0].to_string(),
                })
            }
            (Some(word), None) => word.to_string(),
            (Some(_), Some(_)) => {
                return Err(CorpusError::MultiTokenWord {
                    line,
                    raw: columns[0].to_string(),
                })
            }
        };
        items.push(LabeledWord { word, tag });
    }
    Ok(Corpus::new(name, items))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_corpus(&name, &text)
}

pub fn format_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for item in &corpus.items {
        out.push_str(&item.word);
        out.push('\t');
        out.push_str(item.tag.as_str());
        out.push('\n');
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, format_corpus(corpus)).map_err(|e| CorpusError::io(path, e))
}

/// Seeded Fisher-Yates shuffle followed by contiguous cuts at
/// `floor(n*train)` and `floor(n*(train+dev))`.
pub fn shuffle_split(
    corpus: &Corpus,
    seed: u64,
    ratios: (f64, f64, f64),
) -> Result<(Corpus, Corpus, Corpus), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let (train, dev, test) = ratios;
    if !(train > 0.0 && dev > 0.0 && test > 0.0) {
        return Err(CorpusError::InvalidRatio(ratios));
    }
    let sum = train + dev + test;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::RatioSum { sum });
    }
    let mut items = corpus.items.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);

    let n = items.len() as f64;
    let first = ((n * train).floor() as usize).min(items.len());
    let second = ((n * (train + dev)).floor() as usize).clamp(first, items.len());
    let test_items = items.split_off(second);
    let dev_items = items.split_off(first);

    let part = |suffix: &str, items: Vec<LabeledWord>| Corpus {
        name: format!("{}.{suffix}", corpus.name),
        items,
        seed: Some(seed),
    };
    Ok((
        part("train", items),
        part("dev", dev_items),
        part("test", test_items),
    ))
}

/// Result of matching two monolingual word lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommonWords {
    pub a_only: BTreeSet<String>,
    pub b_only: BTreeSet<String>,
    /// Candidate `wal-gof` items.
    pub common: BTreeSet<String>,
}

/// Exact-string matching of two cleaned word sets.
pub fn dedupe_common(list_a: &BTreeSet<String>, list_b: &BTreeSet<String>) -> CommonWords {
    CommonWords {
        a_only: list_a.difference(list_b).cloned().collect(),
        b_only: list_b.difference(list_a).cloned().collect(),
        common: list_a.intersection(list_b).cloned().collect(),
    }
}

/// Reads a one-word-per-line list, cleaning each line.
pub fn load_word_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    Ok(text
        .lines()
        .flat_map(|line| tokenize(&clean_text(line)))
        .collect())
}

pub fn save_word_list<'a>(
    words: impl IntoIterator<Item = &'a String>,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for word in words {
        writeln!(out, "{word}").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub fn stats(corpus: &Corpus) -> TagDistribution {
    TagDistribution::from_tags(corpus.items.iter().map(|item| item.tag))
}
