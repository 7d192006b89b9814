//! Acceptance checks, one test per criterion. Each prints a single
//! `PASS`/`FAIL` line straight to stdout (past the harness capture) and
//! then asserts, so a failing criterion also fails `cargo test`.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wolgof::annotation::{majority_vote, AnnotationStore, Outcome};
use wolgof::corpus::{
    clean_text, dedupe_common, format_corpus, load_corpus, load_word_list, parse_corpus,
    save_corpus, shuffle_split, Corpus, LabeledWord, Tag,
};
use wolgof::evaluation::evaluate;
use wolgof::models::{
    evaluate_examples, targets, train, CharVocab, EmbeddingTable, Model, ModelConfig, ModelKind,
    Trainer, TrainingConfig,
};
use wolgof::nn::layers::{
    length_mask, Attention, BatchNorm, BiLstm, Conv1d, Dense, Dropout, Embedding, LstmCell,
};
use wolgof::nn::{
    grad_check, grad_check_with_reference, Ctx, GradCheckOptions, Graph, Mode, NnError, NodeId,
    ParamId, ParamStore, Scalar, Tensor,
};
use wolgof::synthetic::{generate, SyntheticSpec};

// Pinned tolerances and budgets.
const GRAD_TOL_F64: f64 = 1e-5;
const GRAD_TOL_F32: f64 = 1e-3;
const GRAD_SEEDS: u64 = 20;
const GRAD_BUDGET_SECS: f64 = 60.0;
const METRIC_TOL: f64 = 1e-9;
const METRIC_CASES: usize = 1000;
const METRIC_BUDGET_SECS: f64 = 5.0;
const OVERFIT_WORDS: usize = 60;
const OVERFIT_TARGET_F1: f64 = 0.95;
const OVERFIT_MAX_EPOCHS: usize = 300;
const OVERFIT_BUDGET_SECS: f64 = 120.0;
const DIRECTIONAL_SEEDS: u64 = 5;
const PROBE_WORDS: usize = 100;

fn verdict(criterion: &str, ok: bool, detail: &str) {
    let line = format!("{} {criterion}: {detail}\n", if ok { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "{criterion}: {detail}");
}

fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn random_table(words: impl IntoIterator<Item = String>, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(dim);
    for w in words {
        let v = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        table.insert(w, v).expect("dimension matches");
    }
    table
}

// ---------------------------------------------------------------------
// Gradient correctness

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Layer {
    Dense,
    Embedding,
    LstmStep,
    BiLstm,
    Attention,
    Conv1d,
    MaxPool,
    BatchNormTrain,
    BatchNormInfer,
    DropoutInfer,
    DropoutTrain,
    SoftmaxCrossEntropy,
}

const LAYERS: [Layer; 12] = [
    Layer::Dense,
    Layer::Embedding,
    Layer::LstmStep,
    Layer::BiLstm,
    Layer::Attention,
    Layer::Conv1d,
    Layer::MaxPool,
    Layer::BatchNormTrain,
    Layer::BatchNormInfer,
    Layer::DropoutInfer,
    Layer::DropoutTrain,
    Layer::SoftmaxCrossEntropy,
];

enum Built {
    Dense(Dense),
    Embedding(Embedding),
    Lstm(LstmCell, ParamId, ParamId),
    BiLstm(BiLstm),
    Attention(Attention),
    Conv(Conv1d),
    Norm(BatchNorm),
    Plain,
}

/// One randomly shaped layer instance. Inputs are trainable parameters so
/// their gradients are checked along with the weights.
struct LayerCase {
    layer: Layer,
    store: ParamStore<f64>,
    input: Option<ParamId>,
    built: Built,
    ids: Vec<Vec<usize>>,
    lengths: Vec<usize>,
    targets: Vec<usize>,
    probe: Vec<f64>,
    seed: u64,
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

impl LayerCase {
    fn new(layer: Layer, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 101 + layer as u64);
        let b = rng.random_range(1..=3);
        let l = rng.random_range(1..=5);
        let d = rng.random_range(1..=4);
        let h = rng.random_range(1..=3);
        let mut store = ParamStore::new();
        let mut input = None;
        let mut ids = Vec::new();
        let mut lengths = Vec::new();
        let mut targets = Vec::new();
        let mut add_input = |store: &mut ParamStore<f64>, rng: &mut ChaCha8Rng, shape: &[usize]| {
            let t = random_tensor(rng, shape);
            input = Some(store.add("input", t));
        };
        let built = match layer {
            Layer::Dense => {
                add_input(&mut store, &mut rng, &[b, d]);
                Built::Dense(Dense::new(&mut store, "dense", d, h, &mut rng))
            }
            Layer::Embedding => {
                let vocab = rng.random_range(2..=6);
                ids = (0..b).map(|_| (0..l).map(|_| rng.random_range(0..vocab)).collect()).collect();
                Built::Embedding(Embedding::new(&mut store, "emb", vocab, d, &mut rng))
            }
            Layer::LstmStep => {
                add_input(&mut store, &mut rng, &[b, d]);
                let h0 = store.add("h0", random_tensor(&mut rng, &[b, h]));
                let c0 = store.add("c0", random_tensor(&mut rng, &[b, h]));
                Built::Lstm(LstmCell::new(&mut store, "lstm", d, h, &mut rng), h0, c0)
            }
            Layer::BiLstm | Layer::Attention => {
                add_input(&mut store, &mut rng, &[b, l, d]);
                lengths = (0..b).map(|_| rng.random_range(1..=l)).collect();
                if layer == Layer::BiLstm {
                    Built::BiLstm(BiLstm::new(&mut store, "bilstm", d, h, &mut rng))
                } else {
                    Built::Attention(Attention::new(&mut store, "attn", d, h, &mut rng))
                }
            }
            Layer::Conv1d => {
                add_input(&mut store, &mut rng, &[b, l, d]);
                let kernel = rng.random_range(1..=4);
                Built::Conv(Conv1d::new(&mut store, "conv", d, h, kernel, &mut rng))
            }
            Layer::MaxPool => {
                add_input(&mut store, &mut rng, &[b, l, d]);
                Built::Plain
            }
            Layer::BatchNormTrain | Layer::BatchNormInfer => {
                add_input(&mut store, &mut rng, &[b + 1, d]);
                let norm = BatchNorm::new(&mut store, "bn", d);
                for v in store.value_mut(norm.gamma).data_mut() {
                    *v = rng.random_range(0.5..1.5);
                }
                for v in store.value_mut(norm.beta).data_mut() {
                    *v = rng.random_range(-0.5..0.5);
                }
                for v in store.value_mut(norm.running_mean).data_mut() {
                    *v = rng.random_range(-0.5..0.5);
                }
                for v in store.value_mut(norm.running_var).data_mut() {
                    *v = rng.random_range(0.5..2.0);
                }
                Built::Norm(norm)
            }
            Layer::DropoutInfer | Layer::DropoutTrain => {
                add_input(&mut store, &mut rng, &[b, d]);
                Built::Plain
            }
            Layer::SoftmaxCrossEntropy => {
                let classes = rng.random_range(2..=4);
                add_input(&mut store, &mut rng, &[b, classes]);
                targets = (0..b).map(|_| rng.random_range(0..classes)).collect();
                Built::Plain
            }
        };
        let mut case = LayerCase {
            layer,
            store,
            input,
            built,
            ids,
            lengths,
            targets,
            probe: Vec::new(),
            seed,
        };
        let mut g = Graph::new();
        let outputs = case.outputs(&case.store, &mut g).expect("layer builds");
        let n: usize = outputs.iter().map(|&o| g.value(o).len()).sum();
        case.probe = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        case
    }

    fn outputs<T: Scalar>(&self, store: &ParamStore<T>, g: &mut Graph<T>) -> Result<Vec<NodeId>, NnError> {
        let x = self.input.map(|id| g.param(store, id));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(match (&self.built, self.layer) {
            (Built::Dense(dense), _) => vec![dense.forward(g, store, x.unwrap())?],
            (Built::Embedding(emb), _) => vec![emb.forward(g, store, &self.ids)?],
            (Built::Lstm(cell, h0, c0), _) => {
                let (h0, c0) = (g.param(store, *h0), g.param(store, *c0));
                let (h, c) = cell.step(g, store, x.unwrap(), h0, c0)?;
                vec![h, c]
            }
            (Built::BiLstm(bi), _) => {
                let out = bi.run(g, store, x.unwrap(), &self.lengths)?;
                vec![out.states, out.last]
            }
            (Built::Attention(attn), _) => {
                let steps = g.value(x.unwrap()).shape()[1];
                let mask = length_mask(&self.lengths, steps);
                let (context, weights) = attn.forward(g, store, x.unwrap(), &mask)?;
                vec![context, weights]
            }
            (Built::Conv(conv), _) => vec![conv.forward(g, store, x.unwrap())?],
            (Built::Norm(norm), layer) => {
                let mode = if layer == Layer::BatchNormTrain { Mode::Train } else { Mode::Infer };
                vec![norm.forward(g, store, x.unwrap(), mode)?.0]
            }
            (Built::Plain, Layer::MaxPool) => vec![g.max_pool_time(x.unwrap())?],
            (Built::Plain, Layer::DropoutInfer) => {
                let mut ctx = Ctx::new(Mode::Infer, &mut rng);
                vec![Dropout::new(0.3)?.forward(g, x.unwrap(), &mut ctx)?]
            }
            (Built::Plain, Layer::DropoutTrain) => {
                let mut ctx = Ctx::new(Mode::Train, &mut rng);
                vec![Dropout::new(0.3)?.forward(g, x.unwrap(), &mut ctx)?]
            }
            (Built::Plain, _) => vec![x.unwrap()],
        })
    }

    fn loss<T: Scalar>(&self, store: &ParamStore<T>) -> Result<(Graph<T>, NodeId), NnError> {
        let mut g = Graph::new();
        let outputs = self.outputs(store, &mut g)?;
        if self.layer == Layer::SoftmaxCrossEntropy {
            let loss = g.softmax_cross_entropy(outputs[0], &self.targets)?;
            return Ok((g, loss));
        }
        let mut offset = 0;
        let mut total: Option<NodeId> = None;
        for out in outputs {
            let n = g.value(out).len();
            let weights = self.probe[offset..offset + n].iter().map(|&w| T::of(w)).collect();
            offset += n;
            let term = g.sum_product(out, weights)?;
            total = Some(match total {
                Some(t) => g.add(t, term)?,
                None => term,
            });
        }
        Ok((g, total.expect("at least one output")))
    }
}

const TOY_WORDS: [&str; 4] = ["asa", "hintte", "kaallidi", "giddiis"];
const TOY_TAGS: [Tag; 4] = [Tag::Wal, Tag::Gof, Tag::WalGof, Tag::Wal];

fn toy_config(kind: ModelKind) -> ModelConfig {
    let mut c = ModelConfig::new(kind);
    c.char_embed_dim = 3;
    c.hidden = 4;
    c.dense = 5;
    c.cnn_filters = 2;
    c.cnn_kernels = vec![2, 3];
    c.ext_embed_dim = 6;
    c.hash_dim = 64;
    c.max_word_len = 10;
    c
}

fn toy_model<T: Scalar>(kind: ModelKind, seed: u64) -> Model<T> {
    let config = toy_config(kind);
    let vocab = CharVocab::from_words(TOY_WORDS, config.max_word_len).unwrap();
    let table = random_table(TOY_WORDS.map(String::from), config.ext_embed_dim, seed);
    let mut model = Model::build(config, vocab, Some(table), seed).unwrap();
    // Moves biases and weights off exact zeros and activation kinks.
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
    for p in model.params_mut().iter_mut().filter(|p| p.trainable) {
        for v in p.value.data_mut() {
            *v = *v + T::of(rng.random_range(-0.1..0.1));
        }
    }
    model
}

#[test]
fn gradient_correctness() {
    let start = Instant::now();
    let mut worst: BTreeMap<String, (f64, f64)> = BTreeMap::new();
    let mut checks = 0usize;
    let mut failures = Vec::new();
    let mut record = |name: String, f64_err: f64, f32_err: f64| {
        let entry = worst.entry(name.clone()).or_insert((0.0, 0.0));
        entry.0 = entry.0.max(f64_err);
        entry.1 = entry.1.max(f32_err);
        if !(f64_err <= GRAD_TOL_F64 && f32_err <= GRAD_TOL_F32) {
            failures.push(format!("{name}: f64 {f64_err:.2e}, f32 {f32_err:.2e}"));
        }
    };

    for layer in LAYERS {
        for seed in 0..GRAD_SEEDS {
            let case = LayerCase::new(layer, seed);
            let mut store = case.store.clone();
            let r64 = grad_check(&mut store, |s| case.loss(s), &GradCheckOptions::f64()).unwrap();
            let mut store32: ParamStore<f32> = case.store.cast();
            let r32 = grad_check_with_reference(
                &mut store32,
                |s| case.loss(s),
                |s| case.loss(s),
                &GradCheckOptions::f32(),
            )
            .unwrap();
            checks += 2;
            record(format!("{layer:?} seed {seed}"), r64.max_rel_error, r32.max_rel_error);
        }
    }

    for kind in ModelKind::ALL {
        for seed in 0..3 {
            for mode in [Mode::Infer, Mode::Train] {
                let mut m64: Model<f64> = toy_model(kind, seed);
                let r64 = m64
                    .grad_check(&TOY_WORDS, &TOY_TAGS, mode, seed, &GradCheckOptions::f64())
                    .unwrap();
                let mut m32: Model<f32> = toy_model(kind, seed);
                let r32 = m32
                    .grad_check_with_reference(&TOY_WORDS, &TOY_TAGS, mode, seed, &GradCheckOptions::f32())
                    .unwrap();
                checks += 2;
                record(format!("{} {mode:?} seed {seed}", kind.name()), r64.max_rel_error, r32.max_rel_error);
            }
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let max64 = worst.values().map(|w| w.0).fold(0.0, f64::max);
    let max32 = worst.values().map(|w| w.1).fold(0.0, f64::max);
    let ok = failures.is_empty() && elapsed < GRAD_BUDGET_SECS;
    verdict(
        "gradient correctness",
        ok,
        &format!(
            "{} layers x {GRAD_SEEDS} seeds + {} model kinds x 3 seeds x 2 modes, {checks} checks; \
             max rel err f64 {max64:.2e} (tol {GRAD_TOL_F64:e}), f32 {max32:.2e} (tol {GRAD_TOL_F32:e}); \
             {elapsed:.1}s (budget {GRAD_BUDGET_SECS}s){}",
            LAYERS.len(),
            ModelKind::ALL.len(),
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(" | ")) }
        ),
    );
}

// ---------------------------------------------------------------------
// Majority vote

#[test]
fn majority_vote_oracle() {
    let mut mismatches = Vec::new();
    let mut no_consensus = 0;
    for a in Tag::ALL {
        for b in Tag::ALL {
            for c in Tag::ALL {
                let votes = [a, b, c];
                // Brute force: the tag that appears at least twice, if any.
                let expected = Tag::ALL
                    .into_iter()
                    .find(|t| votes.iter().filter(|v| *v == t).count() >= 2);
                let got = majority_vote(&votes).unwrap();
                if got == Outcome::NoConsensus {
                    no_consensus += 1;
                }
                if got.tag() != expected {
                    mismatches.push(format!("{votes:?} -> {got:?}"));
                }
            }
        }
    }
    verdict(
        "majority-vote oracle",
        mismatches.is_empty() && no_consensus == 6,
        &format!("27 triples, {} mismatches, {no_consensus} without consensus (expected 6)", mismatches.len()),
    );
}

// ---------------------------------------------------------------------
// Metrics

struct Brute {
    precision: [Option<f64>; 3],
    recall: [Option<f64>; 3],
    f1: [Option<f64>; 3],
    macro_p: f64,
    macro_r: f64,
    macro_f1: f64,
    accuracy: f64,
}

/// Counts item by item, without a confusion matrix. F1 uses the
/// `2tp / (2tp + fp + fn)` form rather than the harmonic mean.
fn brute_metrics(gold: &[Tag], pred: &[Tag]) -> Brute {
    let mut out = Brute {
        precision: [None; 3],
        recall: [None; 3],
        f1: [None; 3],
        macro_p: 0.0,
        macro_r: 0.0,
        macro_f1: 0.0,
        accuracy: 0.0,
    };
    let mut present = 0.0;
    for (k, tag) in Tag::ALL.into_iter().enumerate() {
        let (mut tp, mut fp, mut fneg) = (0.0, 0.0, 0.0);
        for (g, p) in gold.iter().zip(pred) {
            match (*g == tag, *p == tag) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
                (false, false) => {}
            }
        }
        if tp + fp + fneg == 0.0 {
            continue;
        }
        let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let r = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        let f = 2.0 * tp / (2.0 * tp + fp + fneg);
        out.precision[k] = Some(p);
        out.recall[k] = Some(r);
        out.f1[k] = Some(f);
        out.macro_p += p;
        out.macro_r += r;
        out.macro_f1 += f;
        present += 1.0;
    }
    out.macro_p /= present;
    out.macro_r /= present;
    out.macro_f1 /= present;
    out.accuracy = gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64 / gold.len() as f64;
    out
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= METRIC_TOL,
        _ => false,
    }
}

#[test]
fn metrics_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut mismatches = 0;
    for _ in 0..METRIC_CASES {
        let n = rng.random_range(1..=40);
        // Sometimes restrict to two classes so absent-class handling is hit.
        let classes = rng.random_range(1..=3);
        let draw = |rng: &mut ChaCha8Rng| Tag::ALL[rng.random_range(0..classes)];
        let gold: Vec<Tag> = (0..n).map(|_| draw(&mut rng)).collect();
        let pred: Vec<Tag> = (0..n).map(|_| draw(&mut rng)).collect();
        let report = evaluate("m", &gold, &pred).unwrap();
        let brute = brute_metrics(&gold, &pred);
        let ok = Tag::ALL.iter().enumerate().all(|(k, &t)| {
            let c = report.class(t);
            close(c.precision, brute.precision[k]) && close(c.recall, brute.recall[k]) && close(c.f1, brute.f1[k])
        }) && (report.macro_avg.precision - brute.macro_p).abs() <= METRIC_TOL
            && (report.macro_avg.recall - brute.macro_r).abs() <= METRIC_TOL
            && (report.macro_avg.f1 - brute.macro_f1).abs() <= METRIC_TOL
            && (report.accuracy - brute.accuracy).abs() <= METRIC_TOL;
        if !ok {
            mismatches += 1;
        }
    }
    use Tag::*;
    let worked = evaluate("m", &[Wal, Wal, Gof, WalGof], &[Wal, Gof, Gof, WalGof]).unwrap();
    let worked_ok = worked.macro_avg.f1 == 7.0 / 9.0;
    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        "metrics oracle",
        mismatches == 0 && worked_ok && elapsed < METRIC_BUDGET_SECS,
        &format!(
            "{METRIC_CASES} random cases, {mismatches} mismatches at tol {METRIC_TOL:e}; \
             worked example macro-F1 {} (7/9 = {}); {elapsed:.2}s",
            worked.macro_avg.f1,
            7.0 / 9.0
        ),
    );
}

// ---------------------------------------------------------------------
// Overfit

fn full_model(kind: ModelKind, corpus: &Corpus, extra_words: &[String], seed: u64) -> Model {
    let config = ModelConfig::new(kind);
    let vocab = CharVocab::from_words(corpus.words(), config.max_word_len).unwrap();
    let table = (kind == ModelKind::ExtEmbLstm).then(|| {
        let words = corpus.words().map(String::from).chain(extra_words.iter().cloned());
        random_table(words, config.ext_embed_dim, 77)
    });
    Model::build(config, vocab, table, seed).unwrap()
}

#[test]
fn overfit_suite() {
    let corpus = generate(&SyntheticSpec::new(OVERFIT_WORDS, 0.3, 7)).unwrap();
    let mut lines = Vec::new();
    let mut all_ok = true;
    for kind in ModelKind::ALL {
        let start = Instant::now();
        let mut model = full_model(kind, &corpus, &[], 0);
        let cfg = TrainingConfig {
            epochs: OVERFIT_MAX_EPOCHS,
            batch_size: 128,
            lr: 0.001,
            seed: 0,
            shuffle_each_epoch: true,
        };
        let mut trainer = Trainer::new(cfg).unwrap();
        let examples = model.encode(&corpus.words().collect::<Vec<_>>()).unwrap();
        let ys = targets(&corpus);
        let gold = corpus.tags();
        let mut reached = None;
        let mut f1 = 0.0;
        for epoch in 1..=OVERFIT_MAX_EPOCHS {
            trainer.run_epoch(&mut model, &examples, &ys).unwrap();
            f1 = evaluate_examples(&model, &examples, &gold, "train").unwrap().macro_avg.f1;
            if f1 >= OVERFIT_TARGET_F1 {
                reached = Some(epoch);
                break;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        let ok = reached.is_some() && secs < OVERFIT_BUDGET_SECS;
        all_ok &= ok;
        lines.push(match reached {
            Some(e) => format!("{} {e} epochs/{secs:.1}s", kind.name()),
            None => format!("{} stuck at {f1:.3} after {OVERFIT_MAX_EPOCHS} epochs", kind.name()),
        });
    }
    verdict(
        "overfit suite",
        all_ok,
        &format!(
            "train macro-F1 >= {OVERFIT_TARGET_F1} on {OVERFIT_WORDS} words, lr 0.001, batch 128: {}",
            lines.join(", ")
        ),
    );
}

// ---------------------------------------------------------------------
// Directional sanity

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn directional_sanity() {
    let mut logreg = Vec::new();
    let mut cnn_bilstm = Vec::new();
    for seed in 0..DIRECTIONAL_SEEDS {
        let corpus = generate(&SyntheticSpec::new(400, 0.3, 100 + seed)).unwrap();
        let (tr, dev, test) = shuffle_split(&corpus, seed, (0.6, 0.2, 0.2)).unwrap();
        let cfg = TrainingConfig {
            seed,
            ..TrainingConfig::default()
        };
        for (kind, scores) in [(ModelKind::LogReg, &mut logreg), (ModelKind::CnnBiLstm, &mut cnn_bilstm)] {
            let mut model = full_model(kind, &tr, &[], seed);
            train(&mut model, &tr, Some(&dev), &cfg).unwrap();
            let examples = model.encode(&test.words().collect::<Vec<_>>()).unwrap();
            scores.push(evaluate_examples(&model, &examples, &test.tags(), "test").unwrap().macro_avg.f1);
        }
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    let (m_lr, m_cnn) = (median(logreg.clone()), median(cnn_bilstm.clone()));
    verdict(
        "directional sanity",
        m_cnn >= m_lr,
        &format!(
            "held-out macro-F1 median over {DIRECTIONAL_SEEDS} seeds: cnn-bilstm {m_cnn:.3} [{}] vs logreg {m_lr:.3} [{}]",
            fmt(&cnn_bilstm),
            fmt(&logreg)
        ),
    );
}

// ---------------------------------------------------------------------
// Determinism

#[test]
fn determinism() {
    let corpus = generate(&SyntheticSpec::new(OVERFIT_WORDS, 0.3, 11)).unwrap();
    let probe: Vec<String> = generate(&SyntheticSpec::new(PROBE_WORDS, 0.3, 999))
        .unwrap()
        .words()
        .map(String::from)
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let cfg = TrainingConfig {
        epochs: 3,
        batch_size: 16,
        seed: 5,
        ..TrainingConfig::default()
    };
    let mut problems = Vec::new();
    for kind in ModelKind::ALL {
        let run = || {
            let mut model = full_model(kind, &corpus, &probe, 5);
            let history = train(&mut model, &corpus, Some(&corpus), &cfg).unwrap();
            (model, history)
        };
        let (model, first) = run();
        let (_, second) = run();
        let bits = |h: &wolgof::models::History| -> Vec<u64> { h.losses().iter().map(|l| l.to_bits()).collect() };
        if bits(&first) != bits(&second) || first.to_csv() != second.to_csv() {
            problems.push(format!("{}: history differs", kind.name()));
        }
        let path = dir.path().join(format!("{}.json", kind.name()));
        model.save(&path, cfg.seed).unwrap();
        let loaded: Model = Model::load(&path, model.embeddings().cloned()).unwrap();
        let before = model.predict_batch(&probe).unwrap();
        let after = loaded.predict_batch(&probe).unwrap();
        let same = before.len() == PROBE_WORDS
            && before.iter().zip(&after).all(|(a, b)| {
                a.tag == b.tag
                    && a.probabilities.iter().zip(&b.probabilities).all(|(x, y)| x.to_bits() == y.to_bits())
            });
        if !same {
            problems.push(format!("{}: reloaded predictions differ", kind.name()));
        }
    }
    verdict(
        "determinism",
        problems.is_empty(),
        &if problems.is_empty() {
            format!(
                "{} kinds: bitwise-identical loss histories across two runs; checkpoint reload gives identical probabilities on {PROBE_WORDS} probe words",
                ModelKind::ALL.len()
            )
        } else {
            problems.join("; ")
        },
    );
}

// ---------------------------------------------------------------------
// Pipeline round trips

fn store_fixpoint(dir: &std::path::Path) -> Result<String, String> {
    let annotators: Vec<String> = ["ann-a", "ann-b", "ann-c"].map(String::from).to_vec();
    let path = dir.join("log.jsonl");
    let mut store = AnnotationStore::create(&path, &annotators).map_err(|e| e.to_string())?;
    let words = ["asa", "hintte", "kaallidi", "giddiis", "hara", "eridi"];
    store.import_words(words, 1).map_err(|e| e.to_string())?;
    let ids: Vec<String> = store.items().map(|i| i.item_id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for id in &ids[..5] {
        for a in &annotators {
            let tag = Tag::ALL[rng.random_range(0..3)];
            store.record_label(id, a, tag, false).map_err(|e| e.to_string())?;
        }
    }
    store.record_label(&ids[5], "ann-a", Tag::Gof, false).map_err(|e| e.to_string())?;
    store.record_label(&ids[5], "ann-a", Tag::Wal, true).map_err(|e| e.to_string())?;
    for d in store.disagreements() {
        store.adjudicate(&d.item_id, Tag::WalGof, "reviewer").map_err(|e| e.to_string())?;
    }
    drop(store);

    let first = AnnotationStore::open(&path).map_err(|e| e.to_string())?;
    let saved = dir.join("saved.jsonl");
    first.save(&saved).map_err(|e| e.to_string())?;
    let second = AnnotationStore::open(&saved).map_err(|e| e.to_string())?;
    let resaved = dir.join("resaved.jsonl");
    second.save(&resaved).map_err(|e| e.to_string())?;
    let same_bytes = std::fs::read(&saved).unwrap() == std::fs::read(&resaved).unwrap();
    if first.decisions() != second.decisions() || first.records() != second.records() || !same_bytes {
        return Err("annotation log is not a fixpoint".into());
    }
    Ok(format!("{} votes", first.records().len()))
}

#[test]
fn pipeline_round_trips() {
    let mut problems = Vec::new();

    let mut runner = TestRunner::new(PropConfig::with_cases(1000));
    let strategy = prop_oneof![
        any::<String>(),
        "[ a-zA-Z'’.,!?<>/=\"0-9:-]{0,40}",
        "(<[a-z]+>|https?://[a-z.]+|[A-Za-z']{1,8}| |[0-9]+){0,8}",
    ];
    if let Err(e) = runner.run(&strategy, |s| {
        let once = clean_text(&s);
        prop_assert_eq!(clean_text(&once), once);
        Ok(())
    }) {
        problems.push(format!("clean_text: {e}"));
    }

    let dir = tempfile::tempdir().unwrap();
    let mut corpora = vec![load_corpus(fixture("table1.tsv")).unwrap()];
    corpora.extend((0..5).map(|s| generate(&SyntheticSpec::new(50 + s as usize * 7, 0.3, s)).unwrap()));
    for (i, c) in corpora.iter().enumerate() {
        let path = dir.path().join(format!("c{i}.tsv"));
        save_corpus(c, &path).unwrap();
        let back = load_corpus(&path).unwrap();
        let again = parse_corpus("again", &format_corpus(&back)).unwrap();
        if back.items != c.items || again.items != back.items {
            problems.push(format!("tsv round trip {i}"));
        }
    }

    let jsonl = store_fixpoint(dir.path());
    if let Err(e) = &jsonl {
        problems.push(e.clone());
    }

    let mut splits = 0;
    for seed in 0..50u64 {
        let n = 1 + (seed as usize * 13) % 97;
        let items: Vec<LabeledWord> = (0..n)
            .map(|i| LabeledWord::new(format!("w{i}"), Tag::ALL[i % 3]))
            .collect();
        let corpus = Corpus::new("p", items.clone());
        for ratios in [(0.8, 0.1, 0.1), (0.6, 0.2, 0.2), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)] {
            let (a, b, c) = shuffle_split(&corpus, seed, ratios).unwrap();
            let mut joined: Vec<String> = a.items.iter().chain(&b.items).chain(&c.items).map(|x| x.word.clone()).collect();
            joined.sort();
            let mut original: Vec<String> = items.iter().map(|x| x.word.clone()).collect();
            original.sort();
            let (again, _, _) = shuffle_split(&corpus, seed, ratios).unwrap();
            let first_cut = (n as f64 * ratios.0).floor() as usize;
            if joined != original || again.items != a.items || a.len() != first_cut {
                problems.push(format!("split n={n} seed={seed} {ratios:?}"));
            }
            splits += 1;
        }
    }

    let common = dedupe_common(
        &load_word_list(fixture("wolayta_sample.txt")).unwrap(),
        &load_word_list(fixture("gofa_sample.txt")).unwrap(),
    );
    let expected: std::collections::BTreeSet<String> =
        ["kaallidi", "biittaa", "iita", "daro"].map(String::from).into();
    if common.common != expected {
        problems.push(format!("common words {:?}", common.common));
    }

    verdict(
        "pipeline round trips",
        problems.is_empty(),
        &if problems.is_empty() {
            format!(
                "clean_text idempotent on 1000 generated strings; {} TSV corpora and the annotation log ({}) are load/save fixpoints; {splits} splits partition their input; common = {:?}",
                corpora.len(),
                jsonl.unwrap_or_default(),
                common.common
            )
        } else {
            problems.join("; ")
        },
    );
}
