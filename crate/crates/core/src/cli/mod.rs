//! The `wolgof` command line. `main.rs` parses arguments and calls [`run`];
//! everything else lives here so it can be tested in-process.

mod manifest;

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

pub use manifest::{digest_inputs, sha256_file, InputDigest, RunManifest};

use crate::annotation::{server, AnnotationError, AnnotationStore};
use crate::corpus::{
    clean_text, dedupe_common, load_corpus, load_word_list, save_corpus, save_word_list,
    shuffle_split, tokenize, CorpusError,
};
use crate::evaluation::{format_report, EvalError, ReportStyle};
use crate::models::{
    evaluate_model, load_embedding_table, train, CharVocab, Fallback, Model, ModelConfig,
    ModelError, ModelKind, TrainingConfig,
};
use crate::nn::checkpoint::ENGINE_VERSION;
use crate::synthetic::{generate, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "wolgof", version, about = "Word-level Wolayta/Gofa language identification")]
pub struct Cli {
    /// Seed for splits, initialization, shuffling and dropout.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Flat `key = value` settings file for model and training options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean raw text into one word per line.
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        /// Keep only the first occurrence of each word.
        #[arg(long)]
        unique: bool,
    },
    /// Split two word lists into `a_only.txt`, `b_only.txt` and `common.txt`.
    Common {
        a: PathBuf,
        b: PathBuf,
        out_dir: PathBuf,
    },
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// Majority-vote an annotation log into a gold corpus.
    Merge {
        store: PathBuf,
        output: PathBuf,
        /// Also write a JSON report of the adjudication queue and agreement.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Shuffle a corpus and cut it into `train.tsv`, `dev.tsv` and `test.tsv`.
    Split {
        corpus: PathBuf,
        out_dir: PathBuf,
        /// Train, dev and test fractions.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
    },
    /// Train a classifier and write a checkpoint, its history and a run manifest.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Tag words with a trained checkpoint.
    Predict {
        checkpoint: PathBuf,
        #[arg(required = true)]
        words: Vec<String>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Tag distribution of a corpus.
    Stats { corpus: PathBuf },
    /// Write a seeded synthetic corpus.
    GenSynthetic {
        #[arg(long)]
        size: usize,
        /// Share of words common to both languages.
        #[arg(long, default_value_t = 0.3)]
        overlap: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// The three annotator ids, used when the store is created.
    #[arg(long, value_delimiter = ',', default_value = "annotator-1,annotator-2,annotator-3")]
    pub annotators: Vec<String>,
    /// Word list to register before serving.
    #[arg(long)]
    pub import: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub batch: u8,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    /// Model kind, e.g. `cnn-bilstm`. May also come from the config file.
    #[arg(long)]
    pub model: Option<String>,
    /// Checkpoint manifest to write; the blob goes next to it as `.bin`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Word-vector file, required for `ext-emb-lstm`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Use zero vectors for words missing from the embedding file.
    #[arg(long)]
    pub zero_fallback: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// History CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    pub corpus: PathBuf,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Row label; defaults to the model kind's name.
    #[arg(long)]
    pub name: Option<String>,
    /// Run manifest path; defaults to `<checkpoint>.eval.run.json`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable code printed as `error[<code>]`.
    pub fn code(&self) -> String {
        match self {
            CliError::Corpus(e) => format!(
                "corpus.{}",
                match e {
                    CorpusError::Io { .. } => "io",
                    CorpusError::MalformedLine { .. } => "malformed_line",
                    CorpusError::UnknownTag { .. } => "unknown_tag",
                    CorpusError::EmptyWord { .. } => "empty_word",
                    CorpusError::MultiTokenWord { .. } => "multi_token_word",
                    CorpusError::EmptyCorpus => "empty_corpus",
                    CorpusError::RatioSum { .. } | CorpusError::InvalidRatio(_) => "ratio",
                    CorpusError::InvalidSetting(_) => "setting",
                }
            ),
            CliError::Annotation(e) => format!("annotation.{}", e.code()),
            CliError::Model(e) => format!("model.{}", e.code()),
            CliError::Eval(_) => "eval".into(),
            CliError::Io { .. } => "io".into(),
            CliError::Usage(_) => "usage".into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn out_err(e: std::io::Error) -> CliError {
    CliError::io(Path::new("<stdout>"), e)
}

/// `dir/name.json` -> `dir/name<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Settings from `--config`: `key = value` lines, `#` comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected `key = value`", n + 1))
            })?;
            entries.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Applies every entry; unknown keys are an error.
    pub fn apply(&self, model: &mut ModelConfig, training: &mut TrainingConfig) -> Result<()> {
        for (k, v) in &self.entries {
            if !(model.set(k, v)? || training.set(k, v)?) {
                return Err(CliError::Usage(format!("unknown config key `{k}`")));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Preprocess {
            input,
            output,
            unique,
        } => preprocess(cli, input, output, *unique, out),
        Command::Common { a, b, out_dir } => common(cli, a, b, out_dir, out),
        Command::Serve(args) => serve(args, out),
        Command::Merge {
            store,
            output,
            report,
        } => merge(cli, store, output, report.as_deref(), out),
        Command::Split {
            corpus,
            out_dir,
            ratios,
        } => split(cli, corpus, out_dir, ratios, out),
        Command::Train(args) => cmd_train(cli, args, out),
        Command::Eval(args) => cmd_eval(cli, args, out),
        Command::Predict {
            checkpoint,
            words,
            embeddings,
        } => predict(cli, checkpoint, words, embeddings.as_deref(), out),
        Command::Stats { corpus } => {
            let dist = load_corpus(corpus)?.stats();
            match cli.format {
                Format::Text => write!(out, "{dist}"),
                Format::Json => writeln!(out, "{:#}", dist.to_json()),
            }
            .map_err(out_err)
        }
        Command::GenSynthetic {
            size,
            overlap,
            noise,
            out: path,
        } => {
            let spec = SyntheticSpec {
                size: *size,
                overlap: *overlap,
                noise: *noise,
                seed: cli.seed.unwrap_or(0),
            };
            let corpus = generate(&spec)?;
            save_corpus(&corpus, path)?;
            let dist = corpus.stats();
            match cli.format {
                Format::Text => write!(out, "{dist}"),
                Format::Json => writeln!(out, "{:#}", dist.to_json()),
            }
            .map_err(out_err)
        }
    }
}

fn preprocess(cli: &Cli, input: &Path, output: &Path, unique: bool, out: &mut dyn Write) -> Result<()> {
    let bytes = fs::read(input).map_err(|e| CliError::io(input, e))?;
    let text = String::from_utf8(bytes).map_err(|e| {
        CliError::Usage(format!("{}: input is not UTF-8 ({e})", input.display()))
    })?;
    let mut seen = std::collections::HashSet::new();
    let (mut lines, mut raw_tokens, mut dropped, mut duplicates) = (0usize, 0usize, 0usize, 0usize);
    let mut words = Vec::new();
    for line in text.lines() {
        lines += 1;
        let raw = line.split_whitespace().count();
        raw_tokens += raw;
        let kept = tokenize(&clean_text(line));
        dropped += raw.saturating_sub(kept.len());
        for w in kept {
            if unique && !seen.insert(w.clone()) {
                duplicates += 1;
                continue;
            }
            words.push(w);
        }
    }
    let mut body = words.join("\n");
    if !body.is_empty() {
        body.push('\n');
    }
    fs::write(output, body).map_err(|e| CliError::io(output, e))?;
    let report = json!({
        "lines": lines,
        "raw_tokens": raw_tokens,
        "words_written": words.len(),
        "tokens_removed": dropped,
        "duplicates_removed": duplicates,
    });
    match cli.format {
        Format::Json => writeln!(out, "{report:#}"),
        Format::Text => writeln!(
            out,
            "{lines} lines, {raw_tokens} raw tokens -> {} words ({dropped} tokens removed, {duplicates} duplicates removed)",
            words.len()
        ),
    }
    .map_err(out_err)
}

fn common(cli: &Cli, a: &Path, b: &Path, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let split = dedupe_common(&load_word_list(a)?, &load_word_list(b)?);
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, words) in [
        ("a_only.txt", &split.a_only),
        ("b_only.txt", &split.b_only),
        ("common.txt", &split.common),
    ] {
        save_word_list(words.iter(), out_dir.join(name))?;
    }
    let (na, nb, nc) = (split.a_only.len(), split.b_only.len(), split.common.len());
    match cli.format {
        Format::Json => writeln!(out, "{:#}", json!({"a_only": na, "b_only": nb, "common": nc})),
        Format::Text => writeln!(out, "a only: {na}\nb only: {nb}\ncommon: {nc}"),
    }
    .map_err(out_err)
}

fn serve(args: &ServeArgs, out: &mut dyn Write) -> Result<()> {
    let mut store = AnnotationStore::open_or_create(&args.store, &args.annotators)?;
    if let Some(path) = &args.import {
        let words = load_word_list(path)?;
        let added = store.import_words(words.iter().map(String::as_str), args.batch)?;
        log::info!("imported {added} new words into batch {}", args.batch);
    }
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid address: {e}")))?;
    let shared = Arc::new(RwLock::new(store));
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io(Path::new("<runtime>"), e))?;
    let mut announce = |bound: SocketAddr| {
        let _ = writeln!(out, "listening on http://{bound}");
        let _ = out.flush();
    };
    runtime
        .block_on(server::serve(shared, addr, &mut announce, async {
            let _ = tokio::signal::ctrl_c().await;
        }))
        .map_err(|e| CliError::io(Path::new(&addr.to_string()), e))
}

fn merge(cli: &Cli, store: &Path, output: &Path, report: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let store = AnnotationStore::open(store)?;
    let merged = store.merge_annotations();
    save_corpus(&merged.corpus, output)?;
    let summary = json!({
        "decided": merged.corpus.len(),
        "needs_adjudication": merged.adjudication,
        "pending": merged.pending,
        "agreement": store.agreement_stats(),
    });
    if let Some(path) = report {
        fs::write(path, format!("{summary:#}\n")).map_err(|e| CliError::io(path, e))?;
    }
    match cli.format {
        Format::Json => writeln!(out, "{summary:#}"),
        Format::Text => {
            writeln!(out, "gold items: {}", merged.corpus.len()).map_err(out_err)?;
            writeln!(out, "awaiting adjudication: {}", merged.adjudication.len()).map_err(out_err)?;
            for d in &merged.adjudication {
                let votes: Vec<String> = d.votes.iter().map(|v| format!("{}={}", v.annotator, v.tag)).collect();
                writeln!(out, "  {} {} [{}]", d.item_id, d.word, votes.join(", ")).map_err(out_err)?;
            }
            writeln!(out, "pending (fewer than 3 votes): {}", merged.pending.len())
        }
    }
    .map_err(out_err)
}

fn split(cli: &Cli, corpus: &Path, out_dir: &Path, ratios: &str, out: &mut dyn Write) -> Result<()> {
    let parts: Vec<f64> = ratios
        .split(',')
        .map(|r| r.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("invalid ratios `{ratios}`")))?;
    let [tr, dv, te] = parts[..] else {
        return Err(CliError::Usage("expected three ratios".into()));
    };
    let seed = cli.seed.unwrap_or(0);
    let (train_c, dev_c, test_c) = shuffle_split(&load_corpus(corpus)?, seed, (tr, dv, te))?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, c) in [("train.tsv", &train_c), ("dev.tsv", &dev_c), ("test.tsv", &test_c)] {
        save_corpus(c, out_dir.join(name))?;
    }
    writeln!(out, "train {} / dev {} / test {}", train_c.len(), dev_c.len(), test_c.len()).map_err(out_err)
}

fn resolve_configs(cli: &Cli, args: &TrainArgs) -> Result<(ModelConfig, TrainingConfig, Option<ConfigFile>)> {
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let kind_name = args
        .model
        .as_deref()
        .or_else(|| file.as_ref().and_then(|f| f.get("kind").or_else(|| f.get("model"))))
        .ok_or_else(|| CliError::Usage("no model kind: pass --model or set `kind` in --config".into()))?;
    let kind: ModelKind = kind_name.parse()?;
    let mut model = ModelConfig::new(kind);
    let mut training = TrainingConfig::default();
    if let Some(f) = &file {
        f.apply(&mut model, &mut training)?;
    }
    model.kind = kind;
    if let Some(e) = args.epochs {
        training.epochs = e;
    }
    if let Some(b) = args.batch_size {
        training.batch_size = b;
    }
    if let Some(lr) = args.lr {
        training.lr = lr;
    }
    if let Some(seed) = cli.seed {
        training.seed = seed;
    }
    model.validate()?;
    training.validate()?;
    Ok((model, training, file))
}

fn cmd_train(cli: &Cli, args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let started_at = Utc::now();
    let (model_cfg, training, _) = resolve_configs(cli, args)?;
    let train_corpus = load_corpus(&args.corpus)?;
    let dev = args.dev.as_deref().map(load_corpus).transpose()?;
    let table = match (&args.embeddings, model_cfg.kind) {
        (Some(p), ModelKind::ExtEmbLstm) => {
            let fallback = if args.zero_fallback { Fallback::ZeroVector } else { Fallback::Error };
            Some(load_embedding_table(p)?.with_fallback(fallback))
        }
        (None, ModelKind::ExtEmbLstm) => {
            return Err(CliError::Usage("ext-emb-lstm needs --embeddings".into()))
        }
        _ => None,
    };
    let vocab = CharVocab::from_words(train_corpus.words(), model_cfg.max_word_len)?;
    let mut model: Model = Model::build(model_cfg.clone(), vocab, table, training.seed)?;
    if let Some(p) = &args.embeddings {
        let absolute = fs::canonicalize(p).map_err(|e| CliError::io(p, e))?;
        model.set_embedding_path(absolute);
    }
    let history = train(&mut model, &train_corpus, dev.as_ref(), &training)?;

    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    model.save(&args.out, training.seed)?;
    let history_path = args.history.clone().unwrap_or_else(|| sibling(&args.out, ".history.csv"));
    fs::write(&history_path, history.to_csv()).map_err(|e| CliError::io(&history_path, e))?;

    let mut inputs: Vec<&Path> = vec![&args.corpus];
    inputs.extend(args.dev.as_deref());
    inputs.extend(cli.config.as_deref());
    inputs.extend(args.embeddings.as_deref());
    let manifest = RunManifest {
        command: "train".into(),
        engine_version: ENGINE_VERSION.into(),
        config: json!({"model": model_cfg, "training": training}),
        seed: training.seed,
        inputs: digest_inputs(&inputs).map_err(|e| CliError::io(&args.corpus, e))?,
        outputs: vec![
            args.out.clone(),
            crate::nn::checkpoint::blob_path(&args.out),
            history_path.clone(),
        ],
        started_at,
        finished_at: Utc::now(),
    };
    let manifest_path = sibling(&args.out, ".run.json");
    manifest.write(&manifest_path).map_err(|e| CliError::io(&manifest_path, e))?;

    match cli.format {
        Format::Json => writeln!(out, "{:#}", json!({"history": history, "checkpoint": args.out, "manifest": manifest_path})),
        Format::Text => {
            let last = history.epochs.last().expect("at least one epoch");
            writeln!(
                out,
                "{}: {} epochs, final loss {:.4}{}\ncheckpoint: {}",
                model_cfg.kind,
                history.epochs.len(),
                last.loss,
                history
                    .best_epoch
                    .map(|e| format!(", kept epoch {e} (best dev macro-F1)"))
                    .unwrap_or_default(),
                args.out.display()
            )
        }
    }
    .map_err(out_err)
}

fn load_model(checkpoint: &Path, embeddings: Option<&Path>) -> Result<Model> {
    if !checkpoint.exists() {
        return Err(CliError::io(
            checkpoint,
            std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
        ));
    }
    let table = embeddings.map(load_embedding_table).transpose()?;
    Ok(Model::load(checkpoint, table)?)
}

fn cmd_eval(cli: &Cli, args: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let started_at = Utc::now();
    let model = load_model(&args.checkpoint, args.embeddings.as_deref())?;
    let corpus = load_corpus(&args.corpus)?;
    let name = args.name.clone().unwrap_or_else(|| model.kind().name().to_string());
    let report = evaluate_model(&model, &corpus, &name)?;
    let style = match cli.format {
        Format::Text => ReportStyle::Text,
        Format::Json => ReportStyle::Json,
    };
    let rendered = format_report(std::slice::from_ref(&report), style);
    write!(out, "{rendered}").map_err(out_err)?;
    let mut outputs = Vec::new();
    if let Some(path) = &args.out {
        fs::write(path, &rendered).map_err(|e| CliError::io(path, e))?;
        outputs.push(path.clone());
    }
    let mut inputs: Vec<&Path> = vec![&args.checkpoint, &args.corpus];
    let blob = crate::nn::checkpoint::blob_path(&args.checkpoint);
    inputs.push(&blob);
    inputs.extend(args.embeddings.as_deref());
    let manifest = RunManifest {
        command: "eval".into(),
        engine_version: ENGINE_VERSION.into(),
        config: json!({"model": model.config(), "name": name, "format": format!("{:?}", cli.format)}),
        seed: cli.seed.unwrap_or(0),
        inputs: digest_inputs(&inputs).map_err(|e| CliError::io(&args.checkpoint, e))?,
        outputs,
        started_at,
        finished_at: Utc::now(),
    };
    let path = args
        .manifest
        .clone()
        .unwrap_or_else(|| sibling(&args.checkpoint, ".eval.run.json"));
    manifest.write(&path).map_err(|e| CliError::io(&path, e))
}

fn predict(cli: &Cli, checkpoint: &Path, words: &[String], embeddings: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let mut cleaned = Vec::with_capacity(words.len());
    for raw in words {
        match tokenize(&clean_text(raw))[..] {
            [ref w] => cleaned.push(w.clone()),
            [] => return Err(CliError::Usage(format!("`{raw}` contains no word"))),
            _ => return Err(CliError::Usage(format!("`{raw}` is more than one word"))),
        }
    }
    let model = load_model(checkpoint, embeddings)?;
    let predictions = model.predict_batch(&cleaned)?;
    match cli.format {
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&predictions).expect("serializes")),
        Format::Text => {
            for p in &predictions {
                let [a, b, c] = p.probabilities;
                writeln!(out, "{}\t{}\twal={a:.4} gof={b:.4} wal-gof={c:.4}", p.word, p.tag).map_err(out_err)?;
            }
            Ok(())
        }
    }
    .map_err(out_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_file_parsing() {
        let f = ConfigFile::parse("# settings\nkind = cnn\nhidden = 32 # smaller\n\nepochs=12\n").unwrap();
        let mut m = ModelConfig::new(ModelKind::LogReg);
        let mut t = TrainingConfig::default();
        f.apply(&mut m, &mut t).unwrap();
        assert_eq!((m.kind, m.hidden, t.epochs), (ModelKind::Cnn, 32, 12));
        assert!(ConfigFile::parse("hidden 32").is_err());
        let bad = ConfigFile::parse("colour = blue").unwrap();
        assert!(matches!(bad.apply(&mut m, &mut t), Err(CliError::Usage(_))));
    }

    #[test]
    fn sibling_paths() {
        assert_eq!(sibling(Path::new("out/m.json"), ".run.json"), PathBuf::from("out/m.run.json"));
        assert_eq!(sibling(Path::new("m"), ".bin"), PathBuf::from("m.bin"));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
