use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ModelConfig, ModelKind};
use super::embedding::{load_embedding_table, EmbeddingTable, Fallback};
use super::features::logreg_features;
use super::vocab::{encoded_len, CharVocab};
use super::ModelError;
use crate::corpus::Tag;
use crate::nn::checkpoint;
use crate::nn::graph::BatchStats;
use crate::nn::layers::{
    length_mask, Attention, BatchNorm, BiLstm, Conv1d, Dense, Dropout, Embedding, LstmCell,
};
use crate::nn::{
    grad_check, grad_check_with_reference, Ctx, GradCheckOptions, GradCheckReport, Graph, Mode, NodeId, ParamId, ParamStore,
    Scalar, Tensor,
};

/// Encoded inputs for a set of words, in the representation the model
/// kind consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum Examples<T> {
    /// Character ids padded to the vocabulary's `max_word_len`.
    Chars {
        ids: Vec<Vec<usize>>,
        lengths: Vec<usize>,
    },
    /// Hashed n-gram counts.
    Sparse(Vec<Vec<(usize, T)>>),
    /// One external vector per word.
    Vectors(Vec<Vec<T>>),
}

impl<T: Scalar> Examples<T> {
    pub fn len(&self) -> usize {
        match self {
            Examples::Chars { ids, .. } => ids.len(),
            Examples::Sparse(rows) => rows.len(),
            Examples::Vectors(rows) => rows.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Examples<T> {
        match self {
            Examples::Chars { ids, lengths } => Examples::Chars {
                ids: indices.iter().map(|&i| ids[i].clone()).collect(),
                lengths: indices.iter().map(|&i| lengths[i]).collect(),
            },
            Examples::Sparse(rows) => Examples::Sparse(indices.iter().map(|&i| rows[i].clone()).collect()),
            Examples::Vectors(rows) => Examples::Vectors(indices.iter().map(|&i| rows[i].clone()).collect()),
        }
    }
}

/// Output of a forward pass: `[B,3]` logits plus any batch-norm
/// statistics gathered in training mode.
pub struct Forward<T> {
    pub logits: NodeId,
    pub batch_stats: Vec<(BatchNorm, BatchStats<T>)>,
}

/// Dense(leaky relu) -> dropout -> dense(classes).
#[derive(Debug, Clone, Copy)]
struct Head {
    hidden: Dense,
    dropout: Dropout,
    out: Dense,
}

impl Head {
    fn new<T: Scalar>(
        store: &mut ParamStore<T>,
        inputs: usize,
        cfg: &ModelConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ModelError> {
        Ok(Head {
            hidden: Dense::new(store, "head.hidden", inputs, cfg.dense, rng),
            dropout: Dropout::new(cfg.dropout)?,
            out: Dense::new(store, "head.out", cfg.dense, cfg.classes, rng),
        })
    }

    fn forward<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        x: NodeId,
        alpha: f64,
        ctx: &mut Ctx<'_>,
    ) -> Result<NodeId, ModelError> {
        let h = self.hidden.forward(g, store, x)?;
        let h = g.leaky_relu(h, T::of(alpha));
        let h = self.dropout.forward(g, h, ctx)?;
        Ok(self.out.forward(g, store, h)?)
    }
}

/// LSTM(hidden) -> batch norm -> dense(relu) -> dense -> dropout -> dense.
#[derive(Debug, Clone, Copy)]
struct ExternalHead {
    lstm: LstmCell,
    norm: BatchNorm,
    first: Dense,
    second: Dense,
    dropout: Dropout,
    out: Dense,
}

#[derive(Debug, Clone)]
enum Network {
    LogReg {
        weight: ParamId,
        bias: ParamId,
    },
    LstmAttn {
        embed: Embedding,
        lstm: LstmCell,
        attention: Attention,
        head: Head,
    },
    BiLstmAttn {
        embed: Embedding,
        lstm: BiLstm,
        attention: Attention,
        head: Head,
    },
    Cnn {
        embed: Embedding,
        convs: Vec<Conv1d>,
        head: Head,
    },
    CnnLstm {
        embed: Embedding,
        convs: Vec<Conv1d>,
        lstm: LstmCell,
        head: Head,
    },
    CnnBiLstm {
        embed: Embedding,
        convs: Vec<Conv1d>,
        lstm: BiLstm,
        head: Head,
    },
    ExtEmbLstm(ExternalHead),
}

/// Result of classifying one word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub word: String,
    pub tag: Tag,
    pub probabilities: [f64; 3],
}

/// Where a checkpointed model finds its external vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingSource {
    path: Option<PathBuf>,
    fallback: Fallback,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Architecture {
    config: ModelConfig,
    vocab: CharVocab,
    embeddings: Option<EmbeddingSource>,
}

/// A word classifier: architecture, character vocabulary, optional
/// external vectors and parameters.
#[derive(Debug, Clone)]
pub struct Model<T: Scalar = f32> {
    config: ModelConfig,
    vocab: CharVocab,
    embeddings: Option<EmbeddingTable>,
    embedding_path: Option<PathBuf>,
    store: ParamStore<T>,
    net: Network,
}

impl<T: Scalar> Model<T> {
    /// Creates a freshly initialized model. `embeddings` is required for
    /// [`ModelKind::ExtEmbLstm`] and ignored otherwise.
    pub fn build(
        config: ModelConfig,
        vocab: CharVocab,
        embeddings: Option<EmbeddingTable>,
        seed: u64,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        if vocab.max_word_len() != config.max_word_len {
            return Err(ModelError::Config(format!(
                "vocabulary max_word_len {} differs from config {}",
                vocab.max_word_len(),
                config.max_word_len
            )));
        }
        let embeddings = match (config.kind, embeddings) {
            (ModelKind::ExtEmbLstm, None) => {
                return Err(ModelError::Config(
                    "ext-emb-lstm needs an embedding table".into(),
                ))
            }
            (ModelKind::ExtEmbLstm, Some(table)) if table.dim() != config.ext_embed_dim => {
                return Err(ModelError::Config(format!(
                    "embedding table has dimension {}, config expects {}",
                    table.dim(),
                    config.ext_embed_dim
                )))
            }
            (ModelKind::ExtEmbLstm, table) => table,
            (_, _) => None,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let net = build_network(&config, &vocab, &mut store, &mut rng)?;
        Ok(Model {
            config,
            vocab,
            embeddings,
            embedding_path: None,
            store,
            net,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn kind(&self) -> ModelKind {
        self.config.kind
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    pub fn embeddings(&self) -> Option<&EmbeddingTable> {
        self.embeddings.as_ref()
    }

    /// Records where the embedding table came from, so checkpoints can
    /// reload it.
    pub fn set_embedding_path(&mut self, path: impl Into<PathBuf>) {
        self.embedding_path = Some(path.into());
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    /// Id of the final layer's bias (shape `[classes]`).
    pub fn output_bias(&self) -> ParamId {
        match &self.net {
            Network::LogReg { bias, .. } => *bias,
            Network::LstmAttn { head, .. }
            | Network::BiLstmAttn { head, .. }
            | Network::Cnn { head, .. }
            | Network::CnnLstm { head, .. }
            | Network::CnnBiLstm { head, .. } => head.out.bias,
            Network::ExtEmbLstm(h) => h.out.bias,
        }
    }

    /// Encodes `words` for this model kind.
    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Result<Examples<T>, ModelError> {
        self.encode_as(words)
    }

    fn encode_as<U: Scalar, S: AsRef<str>>(&self, words: &[S]) -> Result<Examples<U>, ModelError> {
        if words.iter().any(|w| w.as_ref().is_empty()) {
            return Err(ModelError::EmptyWord);
        }
        Ok(match self.config.kind {
            ModelKind::LogReg => Examples::Sparse(
                words
                    .iter()
                    .map(|w| {
                        logreg_features(w.as_ref(), self.config.hash_dim)
                            .into_iter()
                            .map(|(j, c)| (j, U::of(c)))
                            .collect()
                    })
                    .collect(),
            ),
            ModelKind::ExtEmbLstm => {
                let table = self.embeddings.as_ref().expect("checked at build");
                Examples::Vectors(
                    words
                        .iter()
                        .map(|w| {
                            table
                                .lookup(w.as_ref())
                                .map(|v| v.into_iter().map(|x| U::of(f64::from(x))).collect())
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            _ => Examples::Chars {
                ids: words
                    .iter()
                    .map(|w| self.vocab.encode(w.as_ref()))
                    .collect::<Result<_, _>>()?,
                lengths: words
                    .iter()
                    .map(|w| encoded_len(w.as_ref(), &self.vocab))
                    .collect(),
            },
        })
    }

    /// Records the forward pass for `batch` on `g`.
    pub fn forward(
        &self,
        g: &mut Graph<T>,
        batch: &Examples<T>,
        ctx: &mut Ctx<'_>,
    ) -> Result<Forward<T>, ModelError> {
        forward(&self.net, &self.config, &self.store, g, batch, ctx)
    }

    /// Mean cross-entropy of `batch` against `targets` (class indices).
    pub fn loss(
        &self,
        g: &mut Graph<T>,
        batch: &Examples<T>,
        targets: &[usize],
        ctx: &mut Ctx<'_>,
    ) -> Result<(NodeId, Forward<T>), ModelError> {
        let out = self.forward(g, batch, ctx)?;
        let loss = g.softmax_cross_entropy(out.logits, targets)?;
        Ok((loss, out))
    }

    /// Probabilities for already encoded examples, computed in inference
    /// mode.
    pub fn probabilities(&self, examples: &Examples<T>) -> Result<Vec<[f64; 3]>, ModelError> {
        const CHUNK: usize = 256;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut out = Vec::with_capacity(examples.len());
        let indices: Vec<usize> = (0..examples.len()).collect();
        for chunk in indices.chunks(CHUNK) {
            let batch = examples.select(chunk);
            let mut g = Graph::new();
            let mut ctx = Ctx::new(Mode::Infer, &mut rng);
            let fwd = self.forward(&mut g, &batch, &mut ctx)?;
            let logits = g.value(fwd.logits);
            for r in 0..chunk.len() {
                out.push(softmax3(logits.row(r))?);
            }
        }
        Ok(out)
    }

    pub fn predict(&self, word: &str) -> Result<Prediction, ModelError> {
        Ok(self
            .predict_batch(&[word])?
            .pop()
            .expect("one prediction per word"))
    }

    pub fn predict_batch<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<Prediction>, ModelError> {
        let examples = self.encode(words)?;
        let probs = self.probabilities(&examples)?;
        Ok(words
            .iter()
            .zip(probs)
            .map(|(w, p)| Prediction {
                word: w.as_ref().to_string(),
                tag: argmax(&p),
                probabilities: p,
            })
            .collect())
    }

    /// Finite-difference check of the full loss on `words`/`tags`. In
    /// training mode dropout masks are replayed from `seed` on every
    /// evaluation so the loss stays a deterministic function of the
    /// parameters.
    pub fn grad_check<S: AsRef<str>>(
        &mut self,
        words: &[S],
        tags: &[Tag],
        mode: Mode,
        seed: u64,
        opts: &GradCheckOptions,
    ) -> Result<GradCheckReport, ModelError> {
        let batch = self.encode(words)?;
        let targets: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        let mut store = std::mem::take(&mut self.store);
        let (net, config) = (&self.net, &self.config);
        let result = grad_check(
            &mut store,
            |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ctx = Ctx::new(mode, &mut rng);
                let mut g = Graph::new();
                let out = forward(net, config, s, &mut g, &batch, &mut ctx)
                    .map_err(ModelError::into_nn)?;
                let loss = g.softmax_cross_entropy(out.logits, &targets)?;
                Ok((g, loss))
            },
            opts,
        );
        self.store = store;
        Ok(result?)
    }

    /// Like [`Model::grad_check`], but the finite differences are taken
    /// in f64 on a copy of the parameters; meant for `f32` models.
    pub fn grad_check_with_reference<S: AsRef<str>>(
        &mut self,
        words: &[S],
        tags: &[Tag],
        mode: Mode,
        seed: u64,
        opts: &GradCheckOptions,
    ) -> Result<GradCheckReport, ModelError> {
        let batch: Examples<T> = self.encode_as(words)?;
        let reference: Examples<f64> = self.encode_as(words)?;
        let targets: Vec<usize> = tags.iter().map(|t| t.index()).collect();
        let mut store = std::mem::take(&mut self.store);
        let (net, config) = (&self.net, &self.config);
        let result = grad_check_with_reference(
            &mut store,
            |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ctx = Ctx::new(mode, &mut rng);
                let mut g = Graph::new();
                let out = forward(net, config, s, &mut g, &batch, &mut ctx)
                    .map_err(ModelError::into_nn)?;
                let loss = g.softmax_cross_entropy(out.logits, &targets)?;
                Ok((g, loss))
            },
            |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut ctx = Ctx::new(mode, &mut rng);
                let mut g = Graph::new();
                let out = forward(net, config, s, &mut g, &reference, &mut ctx)
                    .map_err(ModelError::into_nn)?;
                let loss = g.softmax_cross_entropy(out.logits, &targets)?;
                Ok((g, loss))
            },
            opts,
        );
        self.store = store;
        Ok(result?)
    }

    fn architecture(&self) -> Architecture {
        Architecture {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            embeddings: self.embeddings.as_ref().map(|t| EmbeddingSource {
                path: self.embedding_path.clone(),
                fallback: t.fallback,
            }),
        }
    }

    /// Writes manifest `path` and its `.bin` blob.
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<(), ModelError> {
        let arch = serde_json::to_value(self.architecture()).expect("architecture serializes");
        checkpoint::save(path.as_ref(), &self.store, arch, seed)?;
        Ok(())
    }

    /// Restores a model saved with [`Model::save`]. An external table
    /// passed here takes precedence over the path recorded in the
    /// checkpoint.
    pub fn load(
        path: impl AsRef<Path>,
        embeddings: Option<EmbeddingTable>,
    ) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let manifest = checkpoint::read_manifest(path)?;
        let arch: Architecture = serde_json::from_value(manifest.architecture.clone())
            .map_err(|e| ModelError::Checkpoint(format!("architecture: {e}")))?;
        let mut recorded_path = None;
        let embeddings = match (arch.config.kind, embeddings, &arch.embeddings) {
            (ModelKind::ExtEmbLstm, Some(table), _) => Some(table),
            (ModelKind::ExtEmbLstm, None, Some(EmbeddingSource { path: Some(p), fallback })) => {
                recorded_path = Some(p.clone());
                Some(load_embedding_table(p)?.with_fallback(*fallback))
            }
            (ModelKind::ExtEmbLstm, None, _) => {
                return Err(ModelError::Checkpoint(
                    "checkpoint does not record an embedding file; pass one explicitly".into(),
                ))
            }
            _ => None,
        };
        let mut model = Model::build(arch.config, arch.vocab, embeddings, manifest.seed)?;
        model.embedding_path = recorded_path;
        checkpoint::load_into(path, &manifest, &mut model.store)?;
        Ok(model)
    }
}

impl ModelError {
    fn into_nn(self) -> crate::nn::NnError {
        match self {
            ModelError::Nn(e) => e,
            other => crate::nn::NnError::Checkpoint(other.to_string()),
        }
    }
}

/// Index of the largest probability; the lowest index wins ties.
pub fn argmax(probs: &[f64; 3]) -> Tag {
    let mut best = 0;
    for i in 1..3 {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    Tag::from_index(best).expect("three classes")
}

fn softmax3<T: Scalar>(logits: &[T]) -> Result<[f64; 3], ModelError> {
    let z: Vec<f64> = logits.iter().map(|v| v.as_f64()).collect();
    if z.len() != 3 || z.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Nn(crate::nn::NnError::NonFinite(format!(
            "logits {z:?}"
        ))));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    Ok([e[0] / total, e[1] / total, e[2] / total])
}

fn build_network<T: Scalar>(
    cfg: &ModelConfig,
    vocab: &CharVocab,
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
) -> Result<Network, ModelError> {
    let h = cfg.hidden;
    let e = cfg.char_embed_dim;
    let conv_width = cfg.cnn_filters * cfg.cnn_kernels.len();
    let net = match cfg.kind {
        ModelKind::LogReg => {
            let weight = store.add("logreg.weight", Tensor::zeros(&[cfg.hash_dim, cfg.classes]));
            let bias = store.add("logreg.bias", Tensor::zeros(&[cfg.classes]));
            Network::LogReg { weight, bias }
        }
        ModelKind::LstmAttn => {
            let embed = Embedding::new(store, "embed", vocab.size(), e, rng);
            let lstm = LstmCell::new(store, "lstm", e, h, rng);
            let attention = Attention::new(store, "attention", h, h, rng);
            let head = Head::new(store, h, cfg, rng)?;
            Network::LstmAttn {
                embed,
                lstm,
                attention,
                head,
            }
        }
        ModelKind::BiLstmAttn => {
            let embed = Embedding::new(store, "embed", vocab.size(), e, rng);
            let lstm = BiLstm::new(store, "bilstm", e, h, rng);
            let attention = Attention::new(store, "attention", 2 * h, 2 * h, rng);
            let head = Head::new(store, 2 * h, cfg, rng)?;
            Network::BiLstmAttn {
                embed,
                lstm,
                attention,
                head,
            }
        }
        ModelKind::Cnn => {
            let embed = Embedding::new(store, "embed", vocab.size(), e, rng);
            let convs = build_convs(cfg, store, rng);
            let head = Head::new(store, conv_width, cfg, rng)?;
            Network::Cnn { embed, convs, head }
        }
        ModelKind::CnnLstm => {
            let embed = Embedding::new(store, "embed", vocab.size(), e, rng);
            let convs = build_convs(cfg, store, rng);
            let lstm = LstmCell::new(store, "lstm", conv_width, h, rng);
            let head = Head::new(store, h, cfg, rng)?;
            Network::CnnLstm {
                embed,
                convs,
                lstm,
                head,
            }
        }
        ModelKind::CnnBiLstm => {
            let embed = Embedding::new(store, "embed", vocab.size(), e, rng);
            let convs = build_convs(cfg, store, rng);
            let lstm = BiLstm::new(store, "bilstm", conv_width, h, rng);
            let head = Head::new(store, 2 * h, cfg, rng)?;
            Network::CnnBiLstm {
                embed,
                convs,
                lstm,
                head,
            }
        }
        ModelKind::ExtEmbLstm => Network::ExtEmbLstm(ExternalHead {
            lstm: LstmCell::new(store, "lstm", cfg.ext_embed_dim, h, rng),
            norm: BatchNorm::new(store, "norm", h),
            first: Dense::new(store, "dense1", h, cfg.dense, rng),
            second: Dense::new(store, "dense2", cfg.dense, cfg.dense, rng),
            dropout: Dropout::new(cfg.dropout)?,
            out: Dense::new(store, "out", cfg.dense, cfg.classes, rng),
        }),
    };
    Ok(net)
}

fn build_convs<T: Scalar>(
    cfg: &ModelConfig,
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
) -> Vec<Conv1d> {
    cfg.cnn_kernels
        .iter()
        .map(|&k| {
            Conv1d::new(
                store,
                &format!("conv{k}"),
                cfg.char_embed_dim,
                cfg.cnn_filters,
                k,
                rng,
            )
        })
        .collect()
}

/// Character embeddings with padded positions forced to zero, so that a
/// padding token looks exactly like the zero padding of a convolution.
fn embed_chars<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    embed: &Embedding,
    ids: &[Vec<usize>],
    lengths: &[usize],
    steps: usize,
) -> Result<NodeId, ModelError> {
    let trimmed: Vec<Vec<usize>> = ids.iter().map(|r| r[..steps].to_vec()).collect();
    let x = embed.forward(g, store, &trimmed)?;
    if lengths.iter().all(|&n| n >= steps) {
        return Ok(x);
    }
    let d = embed.dim;
    let mut mask = Vec::with_capacity(ids.len() * steps * d);
    for &n in lengths {
        for t in 0..steps {
            let keep = if t < n { T::one() } else { T::zero() };
            mask.extend(std::iter::repeat_n(keep, d));
        }
    }
    Ok(g.dropout_mask(x, mask)?)
}

/// Leaky-relu feature maps of every convolution, `[B,L,F]` each.
fn conv_maps<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore<T>,
    convs: &[Conv1d],
    x: NodeId,
    alpha: f64,
) -> Result<Vec<NodeId>, ModelError> {
    convs
        .iter()
        .map(|c| {
            let y = c.forward(g, store, x)?;
            Ok(g.leaky_relu(y, T::of(alpha)))
        })
        .collect()
}

/// Concatenates `[B,L,F_i]` maps along features.
fn concat_maps<T: Scalar>(g: &mut Graph<T>, maps: &[NodeId]) -> Result<NodeId, ModelError> {
    let shape = g.value(maps[0]).shape().to_vec();
    let (b, l) = (shape[0], shape[1]);
    let mut flat = Vec::with_capacity(maps.len());
    let mut width = 0;
    for &m in maps {
        let f = g.value(m).shape()[2];
        width += f;
        flat.push(g.reshape(m, &[b * l, f])?);
    }
    let joined = g.concat(&flat)?;
    Ok(g.reshape(joined, &[b, l, width])?)
}

fn forward<T: Scalar>(
    net: &Network,
    cfg: &ModelConfig,
    store: &ParamStore<T>,
    g: &mut Graph<T>,
    batch: &Examples<T>,
    ctx: &mut Ctx<'_>,
) -> Result<Forward<T>, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::Nn(crate::nn::NnError::EmptyInput { op: "model" }));
    }
    let alpha = cfg.leaky_alpha;
    let mut batch_stats = Vec::new();
    let wrong_input = || ModelError::Config(format!("{} received inputs of another kind", cfg.kind));
    let logits = match net {
        Network::LogReg { weight, bias } => {
            let Examples::Sparse(rows) = batch else {
                return Err(wrong_input());
            };
            let w = g.param(store, *weight);
            let b = g.param(store, *bias);
            let z = g.sparse_linear(w, rows.clone())?;
            g.add_bias(z, b)?
        }
        Network::ExtEmbLstm(h) => {
            let Examples::Vectors(rows) = batch else {
                return Err(wrong_input());
            };
            let x = g.input(Tensor::from_rows(rows)?);
            let seq = g.reshape(x, &[rows.len(), 1, cfg.ext_embed_dim])?;
            let state = h.lstm.run(g, store, seq, &vec![1; rows.len()], false)?.last;
            let (normed, stats) = h.norm.forward(g, store, state, ctx.mode)?;
            if let Some(stats) = stats {
                batch_stats.push((h.norm, stats));
            }
            let z = h.first.forward(g, store, normed)?;
            let z = g.relu(z);
            let z = h.second.forward(g, store, z)?;
            let z = h.dropout.forward(g, z, ctx)?;
            h.out.forward(g, store, z)?
        }
        _ => {
            let Examples::Chars { ids, lengths } = batch else {
                return Err(wrong_input());
            };
            // Recurrent models are exactly invariant to extra padding, so
            // they only run as far as the longest word in the batch; the
            // plain CNN pools over every position and always sees the
            // full width.
            let steps = match net {
                Network::Cnn { .. } => cfg.max_word_len,
                _ => lengths.iter().copied().max().unwrap_or(1).max(1),
            };
            match net {
                Network::LstmAttn {
                    embed,
                    lstm,
                    attention,
                    head,
                } => {
                    let x = embed_chars(g, store, embed, ids, lengths, steps)?;
                    let out = lstm.run(g, store, x, lengths, false)?;
                    let states = g.stack_time(&out.steps)?;
                    let mask = length_mask(lengths, steps);
                    let (context, _) = attention.forward(g, store, states, &mask)?;
                    head.forward(g, store, context, alpha, ctx)?
                }
                Network::BiLstmAttn {
                    embed,
                    lstm,
                    attention,
                    head,
                } => {
                    let x = embed_chars(g, store, embed, ids, lengths, steps)?;
                    let out = lstm.run(g, store, x, lengths)?;
                    let mask = length_mask(lengths, steps);
                    let (context, _) = attention.forward(g, store, out.states, &mask)?;
                    head.forward(g, store, context, alpha, ctx)?
                }
                Network::Cnn { embed, convs, head } => {
                    let x = embed_chars(g, store, embed, ids, lengths, steps)?;
                    let maps = conv_maps(g, store, convs, x, alpha)?;
                    let pooled = maps
                        .into_iter()
                        .map(|m| g.max_pool_time(m))
                        .collect::<Result<Vec<_>, _>>()?;
                    let features = g.concat(&pooled)?;
                    head.forward(g, store, features, alpha, ctx)?
                }
                Network::CnnLstm {
                    embed,
                    convs,
                    lstm,
                    head,
                } => {
                    let x = embed_chars(g, store, embed, ids, lengths, steps)?;
                    let maps = conv_maps(g, store, convs, x, alpha)?;
                    let features = concat_maps(g, &maps)?;
                    let last = lstm.run(g, store, features, lengths, false)?.last;
                    head.forward(g, store, last, alpha, ctx)?
                }
                Network::CnnBiLstm {
                    embed,
                    convs,
                    lstm,
                    head,
                } => {
                    let x = embed_chars(g, store, embed, ids, lengths, steps)?;
                    let maps = conv_maps(g, store, convs, x, alpha)?;
                    let features = concat_maps(g, &maps)?;
                    let last = lstm.run(g, store, features, lengths)?.last;
                    head.forward(g, store, last, alpha, ctx)?
                }
                Network::LogReg { .. } | Network::ExtEmbLstm(_) => unreachable!(),
            }
        }
    };
    Ok(Forward {
        logits,
        batch_stats,
    })
}

/// Architecture summary for logs and run manifests.
pub fn describe(config: &ModelConfig) -> serde_json::Value {
    json!({"kind": config.kind.name(), "label": config.kind.label(), "config": config})
}
