//! Finite-difference checks of analytic gradients, for a hand-built graph
//! and for every model kind.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wolgof::corpus::Tag;
use wolgof::models::{CharVocab, EmbeddingTable, Model, ModelConfig, ModelKind};
use wolgof::nn::layers::LstmCell;
use wolgof::nn::{grad_check, GradCheckOptions, Graph, Mode, ParamStore, Tensor};

const WORDS: [&str; 4] = ["asa", "hintte", "kaallidi", "giddiis"];
const TAGS: [Tag; 4] = [Tag::Wal, Tag::Gof, Tag::WalGof, Tag::Wal];

fn small(kind: ModelKind) -> ModelConfig {
    let mut c = ModelConfig::new(kind);
    c.char_embed_dim = 4;
    c.hidden = 5;
    c.dense = 6;
    c.cnn_filters = 3;
    c.ext_embed_dim = 8;
    c.hash_dim = 128;
    c.max_word_len = 10;
    c
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // One LSTM step, loss = sum of the new hidden state.
    let mut store = ParamStore::<f64>::new();
    let cell = LstmCell::new(&mut store, "cell", 3, 2, &mut rng);
    let x = Tensor::new(vec![2, 3], (0..6).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let report = grad_check(
        &mut store,
        |s| {
            let mut g = Graph::new();
            let input = g.input(x.clone());
            let h0 = g.input(Tensor::zeros(&[2, 2]));
            let c0 = g.input(Tensor::zeros(&[2, 2]));
            let (h, _) = cell.step(&mut g, s, input, h0, c0)?;
            let loss = g.sum_product(h, vec![1.0; 4])?;
            Ok((g, loss))
        },
        &GradCheckOptions::f64(),
    )?;
    println!(
        "lstm step: {} coordinates, max relative error {:.1e}",
        report.coords_checked, report.max_rel_error
    );

    for kind in ModelKind::ALL {
        let config = small(kind);
        let vocab = CharVocab::from_words(WORDS, config.max_word_len)?;
        let mut table = EmbeddingTable::new(config.ext_embed_dim);
        for w in WORDS {
            table.insert(w, (0..config.ext_embed_dim).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        }
        let mut model: Model<f64> = Model::build(config, vocab, Some(table), 1)?;
        // Zero-initialized biases put activations exactly on ReLU kinks.
        for p in model.params_mut().iter_mut().filter(|p| p.trainable) {
            for v in p.value.data_mut() {
                *v += rng.random_range(-0.1..0.1);
            }
        }
        for mode in [Mode::Infer, Mode::Train] {
            let r = model.grad_check(&WORDS, &TAGS, mode, 7, &GradCheckOptions::f64())?;
            println!(
                "{:<13} {:<5?} {:>5} coords  max rel err {:.1e}  (worst: {})",
                kind.name(),
                mode,
                r.coords_checked,
                r.max_rel_error,
                r.worst_param
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
