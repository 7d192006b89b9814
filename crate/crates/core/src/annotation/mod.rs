//! Three-annotator labeling with an append-only JSON-lines store.
//!
//! Every vote and adjudication is appended to the log as it happens;
//! reopening a store replays the log. An item is decided once all three
//! registered annotators have voted and at least two agree. Three-way
//! splits wait in the adjudication queue until a reviewer picks a tag.

pub mod server;

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, LabeledWord, Tag, TagDistribution};

/// Number of annotators whose votes decide an item.
pub const ANNOTATORS_PER_ITEM: usize = 3;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("store line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("store needs exactly {ANNOTATORS_PER_ITEM} distinct annotators, got {0:?}")]
    AnnotatorCount(Vec<String>),
    #[error("unknown item `{0}`")]
    UnknownItem(String),
    #[error("unknown annotator `{0}`")]
    UnknownAnnotator(String),
    #[error("annotator `{annotator}` already labeled `{item_id}`")]
    DuplicateVote { item_id: String, annotator: String },
    #[error("item `{0}` already exists")]
    DuplicateItem(String),
    #[error("item `{0}` has an empty word")]
    EmptyWord(String),
    #[error("batch must be 1 or 2, got {0}")]
    InvalidBatch(u8),
    #[error("item `{0}` is not waiting for adjudication")]
    ItemNotInAdjudication(String),
    #[error("item `{0}` was adjudicated and accepts no further votes")]
    ItemClosed(String),
    #[error("majority vote takes at most {ANNOTATORS_PER_ITEM} votes, got {0}")]
    TooManyVotes(usize),
}

impl AnnotationError {
    /// Stable machine-readable code, also used by the HTTP service.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::Io { .. } => "io",
            AnnotationError::Parse { .. } => "store_parse",
            AnnotationError::AnnotatorCount(_) => "annotator_count",
            AnnotationError::UnknownItem(_) => "unknown_item",
            AnnotationError::UnknownAnnotator(_) => "unknown_annotator",
            AnnotationError::DuplicateVote { .. } => "duplicate_vote",
            AnnotationError::DuplicateItem(_) => "duplicate_item",
            AnnotationError::EmptyWord(_) => "empty_word",
            AnnotationError::InvalidBatch(_) => "invalid_batch",
            AnnotationError::ItemNotInAdjudication(_) => "item_not_in_adjudication",
            AnnotationError::ItemClosed(_) => "item_closed",
            AnnotationError::TooManyVotes(_) => "too_many_votes",
        }
    }
}

type Result<T, E = AnnotationError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Open,
    Decided,
    NeedsAdjudication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub item_id: String,
    pub word: String,
    pub batch: u8,
    pub status: ItemStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub item_id: String,
    pub annotator_id: String,
    pub tag: Tag,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    NoConsensus,
    #[serde(untagged)]
    Label(Tag),
}

impl Outcome {
    pub fn tag(self) -> Option<Tag> {
        match self {
            Outcome::Label(tag) => Some(tag),
            Outcome::NoConsensus => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub item_id: String,
    pub outcome: Outcome,
    pub vote_counts: BTreeMap<Tag, usize>,
    pub status: ItemStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjudicator: Option<String>,
}

/// Returns the tag chosen by at least two votes, if any.
pub fn majority_vote(votes: &[Tag]) -> Result<Outcome> {
    if votes.len() > ANNOTATORS_PER_ITEM {
        return Err(AnnotationError::TooManyVotes(votes.len()));
    }
    let mut counts = [0usize; 3];
    for tag in votes {
        counts[tag.index()] += 1;
    }
    Ok(Tag::ALL
        .into_iter()
        .find(|tag| counts[tag.index()] >= 2)
        .map_or(Outcome::NoConsensus, Outcome::Label))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub annotator: String,
    pub tag: Tag,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub item_id: String,
    pub word: String,
    pub votes: Vec<Vote>,
}

/// One line of the store log. Votes carry `annotator`, adjudications carry
/// `adjudicator`, item registrations carry `batch`, and the first line of a
/// store lists the registered annotators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LogLine {
    #[serde(skip_serializing_if = "Option::is_none")]
    annotators: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    item_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    word: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    batch: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    annotator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    adjudicator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tag: Option<Tag>,
    ts: DateTime<Utc>,
}

impl LogLine {
    fn empty(ts: DateTime<Utc>) -> Self {
        LogLine {
            annotators: None,
            item_id: None,
            word: None,
            batch: None,
            annotator: None,
            adjudicator: None,
            tag: None,
            ts,
        }
    }
}

#[derive(Debug, Clone)]
struct ItemState {
    item_id: String,
    word: String,
    batch: u8,
    registered: DateTime<Utc>,
    votes: BTreeMap<String, Vote>,
    adjudication: Option<(Tag, String, DateTime<Utc>)>,
}

impl ItemState {
    fn tags(&self) -> Vec<Tag> {
        self.votes.values().map(|v| v.tag).collect()
    }

    fn outcome(&self) -> Outcome {
        if let Some((tag, _, _)) = &self.adjudication {
            return Outcome::Label(*tag);
        }
        majority_vote(&self.tags()).expect("at most three registered annotators")
    }

    fn status(&self) -> ItemStatus {
        if self.adjudication.is_some() {
            return ItemStatus::Decided;
        }
        if self.votes.len() < ANNOTATORS_PER_ITEM {
            return ItemStatus::Open;
        }
        match self.outcome() {
            Outcome::Label(_) => ItemStatus::Decided,
            Outcome::NoConsensus => ItemStatus::NeedsAdjudication,
        }
    }

    fn decision(&self) -> Decision {
        let mut vote_counts = BTreeMap::new();
        for vote in self.votes.values() {
            *vote_counts.entry(vote.tag).or_insert(0) += 1;
        }
        let status = self.status();
        Decision {
            item_id: self.item_id.clone(),
            outcome: match status {
                ItemStatus::Open => Outcome::NoConsensus,
                _ => self.outcome(),
            },
            vote_counts,
            status,
            adjudicator: self.adjudication.as_ref().map(|(_, who, _)| who.clone()),
        }
    }

    fn to_item(&self) -> AnnotationItem {
        AnnotationItem {
            item_id: self.item_id.clone(),
            word: self.word.clone(),
            batch: self.batch,
            status: self.status(),
        }
    }
}

/// Items, votes and adjudications, optionally backed by a JSON-lines log.
#[derive(Debug)]
pub struct AnnotationStore {
    path: Option<PathBuf>,
    log: Option<File>,
    created: DateTime<Utc>,
    annotators: Vec<String>,
    items: Vec<ItemState>,
    index: HashMap<String, usize>,
}

/// Outcome of merging a store into a gold corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub corpus: Corpus,
    pub adjudication: Vec<Disagreement>,
    /// Items still short of three votes.
    pub pending: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub first: String,
    pub second: String,
    pub shared_items: usize,
    /// `None` when the pair labeled no item in common.
    pub agreement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub pairs: Vec<PairAgreement>,
    /// Items with all three votes.
    pub completed_items: usize,
    pub full_consensus: f64,
    pub no_consensus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub total_items: usize,
    pub open: usize,
    pub decided: usize,
    pub needs_adjudication: usize,
    /// Distribution of decided labels.
    #[serde(skip)]
    pub distribution: TagDistribution,
}

impl Progress {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "total_items": self.total_items,
            "status_counts": {
                "open": self.open,
                "decided": self.decided,
                "needs_adjudication": self.needs_adjudication,
            },
            "distribution": self.distribution.to_json(),
        })
    }
}

fn validate_annotators(annotators: &[String]) -> Result<()> {
    let mut sorted: Vec<&String> = annotators.iter().collect();
    sorted.sort();
    sorted.dedup();
    if annotators.len() != ANNOTATORS_PER_ITEM
        || sorted.len() != ANNOTATORS_PER_ITEM
        || annotators.iter().any(|a| a.trim().is_empty())
    {
        return Err(AnnotationError::AnnotatorCount(annotators.to_vec()));
    }
    Ok(())
}

impl AnnotationStore {
    /// A store that lives only in memory.
    pub fn in_memory(annotators: &[String]) -> Result<Self> {
        validate_annotators(annotators)?;
        Ok(AnnotationStore {
            path: None,
            log: None,
            created: Utc::now(),
            annotators: annotators.to_vec(),
            items: Vec::new(),
            index: HashMap::new(),
        })
    }

    /// Creates a new log file. Fails if the file already exists.
    pub fn create(path: impl AsRef<Path>, annotators: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let mut store = Self::in_memory(annotators)?;
        let file = OpenOptions::new()
            .append(true)
            .create_new(true)
            .open(path)
            .map_err(|e| io_err(path, e))?;
        store.path = Some(path.to_path_buf());
        store.log = Some(file);
        let mut header = LogLine::empty(store.created);
        header.annotators = Some(annotators.to_vec());
        store.append(&header)?;
        Ok(store)
    }

    /// Replays an existing log.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| io_err(path, e))?;
        let mut store: Option<AnnotationStore> = None;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| io_err(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogLine = serde_json::from_str(&line).map_err(|e| AnnotationError::Parse {
                line: line_no,
                detail: e.to_string(),
            })?;
            match store.as_mut() {
                None => {
                    let annotators = entry.annotators.ok_or_else(|| AnnotationError::Parse {
                        line: line_no,
                        detail: "first line must list the annotators".into(),
                    })?;
                    let mut fresh = Self::in_memory(&annotators)?;
                    fresh.created = entry.ts;
                    store = Some(fresh);
                }
                Some(store) => store.replay(entry).map_err(|e| match e {
                    AnnotationError::Parse { detail, .. } => AnnotationError::Parse {
                        line: line_no,
                        detail,
                    },
                    other => AnnotationError::Parse {
                        line: line_no,
                        detail: other.to_string(),
                    },
                })?,
            }
        }
        let mut store = store.ok_or_else(|| AnnotationError::Parse {
            line: 0,
            detail: "store file is empty".into(),
        })?;
        store.log = Some(
            OpenOptions::new()
                .append(true)
                .open(path)
                .map_err(|e| io_err(path, e))?,
        );
        store.path = Some(path.to_path_buf());
        Ok(store)
    }

    /// Opens `path` if it exists, otherwise creates it with `annotators`.
    pub fn open_or_create(path: impl AsRef<Path>, annotators: &[String]) -> Result<Self> {
        if path.as_ref().exists() {
            Self::open(path)
        } else {
            Self::create(path, annotators)
        }
    }

    fn replay(&mut self, entry: LogLine) -> Result<()> {
        let missing = |field: &str| AnnotationError::Parse {
            line: 0,
            detail: format!("record lacks `{field}`"),
        };
        let item_id = entry.item_id.ok_or_else(|| missing("item_id"))?;
        if let Some(batch) = entry.batch {
            let word = entry.word.ok_or_else(|| missing("word"))?;
            return self.insert_item(item_id, word, batch, entry.ts);
        }
        let tag = entry.tag.ok_or_else(|| missing("tag"))?;
        let idx = self.item_index(&item_id)?;
        if let Some(adjudicator) = entry.adjudicator {
            self.items[idx].adjudication = Some((tag, adjudicator, entry.ts));
        } else {
            let annotator = entry.annotator.ok_or_else(|| missing("annotator"))?;
            self.check_annotator(&annotator)?;
            self.items[idx].votes.insert(
                annotator.clone(),
                Vote {
                    annotator,
                    tag,
                    ts: entry.ts,
                },
            );
        }
        Ok(())
    }

    fn append(&mut self, entry: &LogLine) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            let mut line = serde_json::to_string(entry).expect("log line serializes");
            line.push('\n');
            let path = self.path.as_deref().unwrap_or(Path::new("<store>"));
            log.write_all(line.as_bytes())
                .and_then(|_| log.flush())
                .map_err(|e| io_err(path, e))?;
        }
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// The current state as a compact log: header, then per item its
    /// registration, surviving votes and adjudication. Overwritten votes
    /// are dropped; timestamps are kept, so the output is a fixpoint of
    /// [`AnnotationStore::save`] followed by [`AnnotationStore::open`].
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        let mut header = LogLine::empty(self.created);
        header.annotators = Some(self.annotators.clone());
        lines.push(header);
        for item in &self.items {
            let mut reg = LogLine::empty(item.registered);
            reg.item_id = Some(item.item_id.clone());
            reg.word = Some(item.word.clone());
            reg.batch = Some(item.batch);
            lines.push(reg);
            for vote in item.votes.values() {
                let mut line = LogLine::empty(vote.ts);
                line.item_id = Some(item.item_id.clone());
                line.word = Some(item.word.clone());
                line.annotator = Some(vote.annotator.clone());
                line.tag = Some(vote.tag);
                lines.push(line);
            }
            if let Some((tag, who, ts)) = &item.adjudication {
                let mut line = LogLine::empty(*ts);
                line.item_id = Some(item.item_id.clone());
                line.word = Some(item.word.clone());
                line.adjudicator = Some(who.clone());
                line.tag = Some(*tag);
                lines.push(line);
            }
        }
        lines
            .iter()
            .map(|l| serde_json::to_string(l).expect("log line serializes") + "\n")
            .collect()
    }

    /// Writes [`AnnotationStore::to_jsonl`] to a new file at `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| io_err(path, e))
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn item_index(&self, item_id: &str) -> Result<usize> {
        self.index
            .get(item_id)
            .copied()
            .ok_or_else(|| AnnotationError::UnknownItem(item_id.to_string()))
    }

    fn check_annotator(&self, annotator: &str) -> Result<()> {
        if self.annotators.iter().any(|a| a == annotator) {
            Ok(())
        } else {
            Err(AnnotationError::UnknownAnnotator(annotator.to_string()))
        }
    }

    fn insert_item(
        &mut self,
        item_id: String,
        word: String,
        batch: u8,
        registered: DateTime<Utc>,
    ) -> Result<()> {
        if !(1..=2).contains(&batch) {
            return Err(AnnotationError::InvalidBatch(batch));
        }
        if word.trim().is_empty() {
            return Err(AnnotationError::EmptyWord(item_id));
        }
        if self.index.contains_key(&item_id) {
            return Err(AnnotationError::DuplicateItem(item_id));
        }
        self.index.insert(item_id.clone(), self.items.len());
        self.items.push(ItemState {
            item_id,
            word,
            batch,
            registered,
            votes: BTreeMap::new(),
            adjudication: None,
        });
        Ok(())
    }

    /// Registers a word to be labeled in annotation batch 1 or 2.
    pub fn add_item(&mut self, item_id: &str, word: &str, batch: u8) -> Result<()> {
        let ts = Utc::now();
        self.insert_item(item_id.to_string(), word.to_string(), batch, ts)?;
        let mut line = LogLine::empty(ts);
        line.item_id = Some(item_id.to_string());
        line.word = Some(word.to_string());
        line.batch = Some(batch);
        self.append(&line)
    }

    /// Registers words not yet in the store, with ids `b<batch>-<n>`.
    /// Returns the number of new items.
    pub fn import_words<'a>(
        &mut self,
        words: impl IntoIterator<Item = &'a str>,
        batch: u8,
    ) -> Result<usize> {
        let known: std::collections::HashSet<String> =
            self.items.iter().map(|i| i.word.clone()).collect();
        let mut added = 0;
        for word in words {
            if known.contains(word) {
                continue;
            }
            let mut n = self.items.len() + 1;
            while self.index.contains_key(&format!("b{batch}-{n:06}")) {
                n += 1;
            }
            self.add_item(&format!("b{batch}-{n:06}"), word, batch)?;
            added += 1;
        }
        Ok(added)
    }

    pub fn item(&self, item_id: &str) -> Result<AnnotationItem> {
        Ok(self.items[self.item_index(item_id)?].to_item())
    }

    pub fn items(&self) -> impl Iterator<Item = AnnotationItem> + '_ {
        self.items.iter().map(ItemState::to_item)
    }

    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.items
            .iter()
            .flat_map(|item| {
                item.votes.values().map(|v| AnnotationRecord {
                    item_id: item.item_id.clone(),
                    annotator_id: v.annotator.clone(),
                    tag: v.tag,
                    timestamp: v.ts,
                })
            })
            .collect()
    }

    /// Records one vote. With `overwrite`, a repeated vote replaces the
    /// annotator's earlier one.
    pub fn record_label(
        &mut self,
        item_id: &str,
        annotator: &str,
        tag: Tag,
        overwrite: bool,
    ) -> Result<Decision> {
        let idx = self.item_index(item_id)?;
        self.check_annotator(annotator)?;
        let item = &self.items[idx];
        if item.adjudication.is_some() {
            return Err(AnnotationError::ItemClosed(item_id.to_string()));
        }
        if !overwrite && item.votes.contains_key(annotator) {
            return Err(AnnotationError::DuplicateVote {
                item_id: item_id.to_string(),
                annotator: annotator.to_string(),
            });
        }
        let ts = Utc::now();
        let mut line = LogLine::empty(ts);
        line.item_id = Some(item_id.to_string());
        line.word = Some(item.word.clone());
        line.annotator = Some(annotator.to_string());
        line.tag = Some(tag);
        self.append(&line)?;
        self.items[idx].votes.insert(
            annotator.to_string(),
            Vote {
                annotator: annotator.to_string(),
                tag,
                ts,
            },
        );
        Ok(self.items[idx].decision())
    }

    pub fn decision(&self, item_id: &str) -> Result<Decision> {
        Ok(self.items[self.item_index(item_id)?].decision())
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.items.iter().map(ItemState::decision).collect()
    }

    /// Resolves a three-way split.
    pub fn adjudicate(&mut self, item_id: &str, tag: Tag, adjudicator: &str) -> Result<Decision> {
        let idx = self.item_index(item_id)?;
        let item = &self.items[idx];
        if item.status() != ItemStatus::NeedsAdjudication {
            return Err(AnnotationError::ItemNotInAdjudication(item_id.to_string()));
        }
        let ts = Utc::now();
        let mut line = LogLine::empty(ts);
        line.item_id = Some(item_id.to_string());
        line.word = Some(item.word.clone());
        line.adjudicator = Some(adjudicator.to_string());
        line.tag = Some(tag);
        self.append(&line)?;
        self.items[idx].adjudication = Some((tag, adjudicator.to_string(), ts));
        Ok(self.items[idx].decision())
    }

    /// Up to `limit` open items the annotator has not voted on, batch 1 first.
    pub fn next_batch(&self, annotator: &str, limit: usize) -> Result<Vec<AnnotationItem>> {
        self.check_annotator(annotator)?;
        let mut candidates: Vec<&ItemState> = self
            .items
            .iter()
            .filter(|item| item.status() == ItemStatus::Open && !item.votes.contains_key(annotator))
            .collect();
        candidates.sort_by_key(|item| item.batch);
        Ok(candidates
            .into_iter()
            .take(limit)
            .map(ItemState::to_item)
            .collect())
    }

    pub fn disagreements(&self) -> Vec<Disagreement> {
        self.items
            .iter()
            .filter(|item| item.status() == ItemStatus::NeedsAdjudication)
            .map(|item| Disagreement {
                item_id: item.item_id.clone(),
                word: item.word.clone(),
                votes: item.votes.values().cloned().collect(),
            })
            .collect()
    }

    /// Splits the store into a gold corpus, the adjudication queue and
    /// still-pending items.
    pub fn merge_annotations(&self) -> MergeOutcome {
        let mut corpus = Corpus::new("gold", Vec::new());
        let mut pending = Vec::new();
        for item in &self.items {
            match (item.status(), item.outcome()) {
                (ItemStatus::Decided, Outcome::Label(tag)) => corpus.items.push(LabeledWord {
                    word: item.word.clone(),
                    tag,
                }),
                (ItemStatus::Open, _) => pending.push(item.item_id.clone()),
                _ => {}
            }
        }
        MergeOutcome {
            corpus,
            adjudication: self.disagreements(),
            pending,
        }
    }

    pub fn agreement_stats(&self) -> AgreementReport {
        let mut pairs = Vec::new();
        for (i, first) in self.annotators.iter().enumerate() {
            for second in &self.annotators[i + 1..] {
                let (mut shared, mut agree) = (0usize, 0usize);
                for item in &self.items {
                    if let (Some(a), Some(b)) = (item.votes.get(first), item.votes.get(second)) {
                        shared += 1;
                        agree += usize::from(a.tag == b.tag);
                    }
                }
                pairs.push(PairAgreement {
                    first: first.clone(),
                    second: second.clone(),
                    shared_items: shared,
                    agreement: (shared > 0).then(|| agree as f64 / shared as f64),
                });
            }
        }
        let completed: Vec<&ItemState> = self
            .items
            .iter()
            .filter(|item| item.votes.len() == ANNOTATORS_PER_ITEM)
            .collect();
        let fraction = |pred: &dyn Fn(&ItemState) -> bool| {
            if completed.is_empty() {
                0.0
            } else {
                completed.iter().filter(|item| pred(item)).count() as f64 / completed.len() as f64
            }
        };
        AgreementReport {
            pairs,
            completed_items: completed.len(),
            full_consensus: fraction(&|item| {
                let tags = item.tags();
                tags.iter().all(|&t| t == tags[0])
            }),
            no_consensus: fraction(&|item| {
                majority_vote(&item.tags()) == Ok(Outcome::NoConsensus)
            }),
        }
    }

    pub fn progress(&self) -> Progress {
        let mut progress = Progress {
            total_items: self.items.len(),
            open: 0,
            decided: 0,
            needs_adjudication: 0,
            distribution: TagDistribution::default(),
        };
        let mut decided_tags = Vec::new();
        for item in &self.items {
            match item.status() {
                ItemStatus::Open => progress.open += 1,
                ItemStatus::NeedsAdjudication => progress.needs_adjudication += 1,
                ItemStatus::Decided => {
                    progress.decided += 1;
                    decided_tags.extend(item.outcome().tag());
                }
            }
        }
        progress.distribution = TagDistribution::from_tags(decided_tags);
        progress
    }
}

impl PartialEq for AnnotationError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> AnnotationError {
    AnnotationError::Io {
        path: path.to_path_buf(),
        source,
    }
}
