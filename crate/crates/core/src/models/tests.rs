use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::Tag;
use crate::nn::{GradCheckOptions, Mode};

const WORDS: [&str; 4] = ["asa", "hintte", "kaallidi", "eridi"];
const TAGS: [Tag; 4] = [Tag::Wal, Tag::Gof, Tag::WalGof, Tag::WalGof];

fn tiny(kind: ModelKind) -> ModelConfig {
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

fn table(dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = EmbeddingTable::new(dim);
    for w in WORDS {
        t.insert(w, (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
    }
    t
}

fn build<T: crate::nn::Scalar>(config: ModelConfig, seed: u64) -> Model<T> {
    let vocab = CharVocab::from_words(WORDS, config.max_word_len).unwrap();
    let t = table(config.ext_embed_dim, seed);
    Model::build(config, vocab, Some(t), seed).unwrap()
}

#[test]
fn every_kind_outputs_three_probabilities() {
    for kind in ModelKind::ALL {
        let model: Model = build(tiny(kind), 1);
        for p in model.predict_batch(&WORDS).unwrap() {
            let sum: f64 = p.probabilities.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "{kind}: {sum}");
            assert!(p.probabilities.iter().all(|&q| q >= 0.0));
        }
    }
}

#[test]
fn zero_parameters_give_uniform_output() {
    for kind in ModelKind::ALL {
        let mut model: Model = build(tiny(kind), 2);
        for p in model.params_mut().iter_mut() {
            p.value.fill(0.0);
        }
        let p = model.predict("asa").unwrap();
        for q in p.probabilities {
            assert!((q - 1.0 / 3.0).abs() < 1e-12, "{kind}: {:?}", p.probabilities);
        }
        assert_eq!(p.tag, Tag::Wal, "ties go to the lowest index");
    }
}

#[test]
fn external_head_has_the_documented_shape() {
    let model: Model = build(ModelConfig::new(ModelKind::ExtEmbLstm), 0);
    let shape = |name: &str| {
        let id = model.params().find(name).unwrap_or_else(|| panic!("{name}"));
        model.params().value(id).shape().to_vec()
    };
    assert_eq!(shape("lstm.w_input"), [768, 512]);
    assert_eq!(shape("norm.gamma"), [128]);
    assert_eq!(shape("dense1.weight"), [128, 768]);
    assert_eq!(shape("dense2.weight"), [768, 768]);
    assert_eq!(shape("out.weight"), [768, 3]);
}

#[test]
fn logreg_weight_covers_the_hash_space() {
    let model: Model = build(ModelConfig::new(ModelKind::LogReg), 0);
    let id = model.params().find("logreg.weight").unwrap();
    assert_eq!(model.params().value(id).shape(), [DEFAULT_HASH_DIM, 3]);
}

#[test]
fn external_model_needs_a_matching_table() {
    let vocab = CharVocab::from_words(WORDS, 24).unwrap();
    let cfg = ModelConfig::new(ModelKind::ExtEmbLstm);
    assert!(matches!(
        Model::<f32>::build(cfg.clone(), vocab.clone(), None, 0),
        Err(ModelError::Config(_))
    ));
    assert!(Model::<f32>::build(cfg, vocab, Some(table(5, 0)), 0).is_err());
}

#[test]
fn missing_word_follows_fallback() {
    let model: Model = build(tiny(ModelKind::ExtEmbLstm), 0);
    assert!(matches!(
        model.predict("hara"),
        Err(ModelError::MissingEmbedding(w)) if w == "hara"
    ));
    let vocab = CharVocab::from_words(WORDS, 10).unwrap();
    let t = table(6, 0).with_fallback(Fallback::ZeroVector);
    let model: Model = Model::build(tiny(ModelKind::ExtEmbLstm), vocab, Some(t), 0).unwrap();
    assert!(model.predict("hara").is_ok());
}

#[test]
fn empty_word_is_rejected() {
    for kind in ModelKind::ALL {
        let model: Model = build(tiny(kind), 0);
        assert!(matches!(model.predict(""), Err(ModelError::EmptyWord)));
    }
}

#[test]
fn shifting_the_output_bias_keeps_the_prediction() {
    for kind in ModelKind::ALL {
        let mut model: Model = build(tiny(kind), 3);
        let before = model.predict_batch(&WORDS).unwrap();
        let bias = model.output_bias();
        for b in model.params_mut().value_mut(bias).data_mut() {
            *b += 2.5;
        }
        let after = model.predict_batch(&WORDS).unwrap();
        for (x, y) in before.iter().zip(&after) {
            assert_eq!(x.tag, y.tag, "{kind}");
        }
    }
}

#[test]
fn batch_composition_does_not_change_predictions() {
    for kind in ModelKind::ALL {
        let model: Model = build(tiny(kind), 4);
        let together = model.predict_batch(&WORDS).unwrap();
        for (w, p) in WORDS.iter().zip(&together) {
            assert_eq!(&model.predict(w).unwrap(), p, "{kind} {w}");
        }
    }
}

/// Moves every trainable value off its initial point so no activation
/// sits exactly on a kink (zero biases on zero padding would).
fn jitter<T: crate::nn::Scalar>(model: &mut Model<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in model.params_mut().iter_mut().filter(|p| p.trainable) {
        for v in p.value.data_mut() {
            *v = *v + T::of(rng.random_range(-0.1..0.1));
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    for kind in ModelKind::ALL {
        for mode in [Mode::Infer, Mode::Train] {
            let mut model: Model<f64> = build(tiny(kind), 5);
            jitter(&mut model, 9);
            let report = model
                .grad_check(&WORDS, &TAGS, mode, 11, &GradCheckOptions::f64())
                .unwrap();
            assert!(
                report.max_rel_error <= 1e-5,
                "{kind} {mode:?}: {report:?}"
            );
        }
    }
}

#[test]
fn training_is_reproducible_and_reduces_loss() {
    let corpus = crate::synthetic::generate(&crate::synthetic::SyntheticSpec::new(30, 0.3, 1)).unwrap();
    let cfg = TrainingConfig {
        epochs: 10,
        batch_size: 8,
        seed: 3,
        ..TrainingConfig::default()
    };
    let run = || {
        let vocab = CharVocab::from_words(corpus.words(), 10).unwrap();
        let mut model: Model = Model::build(tiny(ModelKind::BiLstmAttn), vocab, None, 3).unwrap();
        let x = model.encode(&corpus.words().collect::<Vec<_>>()).unwrap();
        let before = evaluate_loss(&model, &x, &targets(&corpus)).unwrap();
        let history = train(&mut model, &corpus, None, &cfg).unwrap();
        let after = evaluate_loss(&model, &x, &targets(&corpus)).unwrap();
        (before, after, history)
    };
    let (before, after, h1) = run();
    let (_, _, h2) = run();
    assert!(after < before, "{before} -> {after}");
    assert_eq!(h1.epochs.len(), 10);
    assert_eq!(h1, h2);
    assert_eq!(h1.to_csv(), h2.to_csv());
}

#[test]
fn zero_epochs_rejected() {
    let corpus = crate::synthetic::generate(&crate::synthetic::SyntheticSpec::new(6, 0.3, 1)).unwrap();
    let mut model: Model = build(tiny(ModelKind::LogReg), 0);
    let cfg = TrainingConfig {
        epochs: 0,
        ..TrainingConfig::default()
    };
    assert!(matches!(train(&mut model, &corpus, None, &cfg), Err(ModelError::Config(_))));
}

#[test]
fn dev_selection_restores_best_epoch() {
    let corpus = crate::synthetic::generate(&crate::synthetic::SyntheticSpec::new(30, 0.3, 2)).unwrap();
    let vocab = CharVocab::from_words(corpus.words(), 10).unwrap();
    let mut model: Model = Model::build(tiny(ModelKind::Cnn), vocab, None, 1).unwrap();
    let cfg = TrainingConfig {
        epochs: 5,
        batch_size: 10,
        ..TrainingConfig::default()
    };
    let history = train(&mut model, &corpus, Some(&corpus), &cfg).unwrap();
    let best = history.best_epoch.unwrap();
    let best_f1 = history.epochs[best - 1].dev_macro_f1.unwrap();
    assert!(history.epochs.iter().all(|e| e.dev_macro_f1.unwrap() <= best_f1));
    let now = evaluate_model(&model, &corpus, "dev").unwrap().macro_avg.f1;
    assert_eq!(now, best_f1);
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for kind in ModelKind::ALL {
        let model: Model = build(tiny(kind), 6);
        let path = dir.path().join(format!("{kind}.json"));
        model.save(&path, 6).unwrap();
        let table = model.embeddings().cloned();
        let loaded: Model = Model::load(&path, table).unwrap();
        assert_eq!(
            loaded.predict_batch(&WORDS).unwrap(),
            model.predict_batch(&WORDS).unwrap(),
            "{kind}"
        );
        assert_eq!(loaded.params(), model.params());
    }
}

#[test]
fn checkpoint_reloads_recorded_embedding_file() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("vectors.txt");
    table(6, 0).save(&emb).unwrap();
    let vocab = CharVocab::from_words(WORDS, 10).unwrap();
    let mut model: Model =
        Model::build(tiny(ModelKind::ExtEmbLstm), vocab, Some(load_embedding_table(&emb).unwrap()), 0).unwrap();
    model.set_embedding_path(&emb);
    let path = dir.path().join("model.json");
    model.save(&path, 0).unwrap();
    let loaded: Model = Model::load(&path, None).unwrap();
    assert_eq!(loaded.predict("asa").unwrap(), model.predict("asa").unwrap());
}
