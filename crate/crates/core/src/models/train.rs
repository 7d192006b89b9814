//! Mini-batch training with Adam.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainingConfig;
use super::model::{argmax, Examples, Model};
use super::ModelError;
use crate::corpus::{Corpus, Tag};
use crate::evaluation::{evaluate, EvalReport};
use crate::nn::{Adam, Ctx, Graph, Mode, NnError, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean training cross-entropy over the epoch's batches, weighted by
    /// batch size.
    pub loss: f64,
    pub dev_macro_f1: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (best dev macro-F1), if a dev set
    /// was given.
    pub best_epoch: Option<usize>,
}

impl History {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    /// `epoch,loss,dev_macro_f1` with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,dev_macro_f1\n");
        for e in &self.epochs {
            let f1 = e.dev_macro_f1.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.loss, f1));
        }
        out
    }
}

pub fn targets(corpus: &Corpus) -> Vec<usize> {
    corpus.items.iter().map(|w| w.tag.index()).collect()
}

/// Optimizer state plus the RNG that drives shuffling and dropout.
pub struct Trainer<T: Scalar> {
    config: TrainingConfig,
    adam: Adam<T>,
    rng: ChaCha8Rng,
    epoch: usize,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: TrainingConfig) -> Result<Self, ModelError> {
        config.validate()?;
        // Separate stream from the one used for initialization.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(1);
        Ok(Trainer {
            adam: Adam::new(config.lr),
            rng,
            epoch: 0,
            config,
        })
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// One pass over `examples`. Returns the mean training loss.
    pub fn run_epoch(
        &mut self,
        model: &mut Model<T>,
        examples: &Examples<T>,
        targets: &[usize],
    ) -> Result<f64, ModelError> {
        let n = examples.len();
        if n == 0 || targets.len() != n {
            return Err(ModelError::EmptyCorpus(format!(
                "{n} examples, {} targets",
                targets.len()
            )));
        }
        self.epoch += 1;
        let mut order: Vec<usize> = (0..n).collect();
        if self.config.shuffle_each_epoch {
            order.shuffle(&mut self.rng);
        }
        let mut total = 0.0;
        for (batch_no, chunk) in order.chunks(self.config.batch_size).enumerate() {
            let non_finite = |detail: String| ModelError::NonFiniteLoss {
                epoch: self.epoch,
                batch: batch_no + 1,
                detail,
            };
            let batch = examples.select(chunk);
            let batch_targets: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let mut g = Graph::new();
            let mut ctx = Ctx::new(Mode::Train, &mut self.rng);
            let (loss, out) = model.loss(&mut g, &batch, &batch_targets, &mut ctx)?;
            let value = g.value(loss).item().as_f64();
            if !value.is_finite() {
                return Err(non_finite(format!("loss = {value}")));
            }
            g.backward(loss, model.params_mut())?;
            match self.adam.step(model.params_mut()) {
                Err(NnError::NonFiniteGradient(name)) => {
                    return Err(non_finite(format!("gradient of `{name}`")))
                }
                other => other?,
            }
            for (norm, stats) in &out.batch_stats {
                norm.update_running(model.params_mut(), stats);
            }
            total += value * chunk.len() as f64;
        }
        Ok(total / n as f64)
    }
}

/// Mean cross-entropy in inference mode.
pub fn evaluate_loss<T: Scalar>(
    model: &Model<T>,
    examples: &Examples<T>,
    targets: &[usize],
) -> Result<f64, ModelError> {
    let probs = model.probabilities(examples)?;
    if probs.is_empty() {
        return Err(ModelError::EmptyCorpus("nothing to evaluate".into()));
    }
    let total: f64 = probs.iter().zip(targets).map(|(p, &y)| -p[y].ln()).sum();
    Ok(total / probs.len() as f64)
}

/// Predicts every word of `corpus` and scores it against the gold tags.
pub fn evaluate_model<T: Scalar>(
    model: &Model<T>,
    corpus: &Corpus,
    name: &str,
) -> Result<EvalReport, ModelError> {
    let examples = model.encode(&corpus.words().collect::<Vec<_>>())?;
    evaluate_examples(model, &examples, &corpus.tags(), name)
}

pub fn evaluate_examples<T: Scalar>(
    model: &Model<T>,
    examples: &Examples<T>,
    gold: &[Tag],
    name: &str,
) -> Result<EvalReport, ModelError> {
    let pred: Vec<Tag> = model.probabilities(examples)?.iter().map(argmax).collect();
    Ok(evaluate(name, gold, &pred)?)
}

/// Trains for `config.epochs` epochs. With a dev corpus the parameters of
/// the epoch with the best dev macro-F1 (earliest on ties) are restored at
/// the end.
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_corpus: &Corpus,
    dev: Option<&Corpus>,
    config: &TrainingConfig,
) -> Result<History, ModelError> {
    if train_corpus.is_empty() {
        return Err(ModelError::EmptyCorpus(train_corpus.name.clone()));
    }
    if let Some(d) = dev.filter(|d| d.is_empty()) {
        return Err(ModelError::EmptyCorpus(d.name.clone()));
    }
    let mut trainer = Trainer::new(config.clone())?;
    let examples = model.encode(&train_corpus.words().collect::<Vec<_>>())?;
    let ys = targets(train_corpus);
    let dev_set = dev
        .map(|d| -> Result<_, ModelError> {
            Ok((model.encode(&d.words().collect::<Vec<_>>())?, d.tags()))
        })
        .transpose()?;

    let mut history = History::default();
    let mut best: Option<(f64, crate::nn::ParamStore<T>)> = None;
    for _ in 0..config.epochs {
        let loss = trainer.run_epoch(model, &examples, &ys)?;
        let dev_f1 = match &dev_set {
            Some((x, gold)) => Some(evaluate_examples(model, x, gold, "dev")?.macro_avg.f1),
            None => None,
        };
        log::info!(
            "epoch {}/{}: loss {loss:.5}{}",
            trainer.epoch(),
            config.epochs,
            dev_f1.map(|f| format!(", dev macro-F1 {f:.4}")).unwrap_or_default()
        );
        if let Some(f1) = dev_f1 {
            if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
                best = Some((f1, model.params().clone()));
                history.best_epoch = Some(trainer.epoch());
            }
        }
        history.epochs.push(EpochRecord {
            epoch: trainer.epoch(),
            loss,
            dev_macro_f1: dev_f1,
        });
    }
    if let Some((_, params)) = best {
        *model.params_mut() = params;
    }
    Ok(history)
}
