//! Trains every character-level model kind on a synthetic corpus and
//! compares them on a held-out split.
//!
//! ```bash
//! cargo run --release --example train_char_models
//! ```

use std::error::Error;

use wolgof::corpus::shuffle_split;
use wolgof::evaluation::{format_report, ReportStyle};
use wolgof::models::{evaluate_model, train, CharVocab, Model, ModelConfig, ModelKind, TrainingConfig};
use wolgof::synthetic::{generate, SyntheticSpec};

pub fn run_with(size: usize, epochs: usize) -> Result<(), Box<dyn Error>> {
    let seed = 11;
    let corpus = generate(&SyntheticSpec::new(size, 0.3, seed).with_noise(0.05))?;
    let (tr, dev, test) = shuffle_split(&corpus, seed, (0.8, 0.1, 0.1))?;
    let cfg = TrainingConfig {
        epochs,
        lr: 0.005,
        seed,
        ..TrainingConfig::default()
    };

    let mut reports = Vec::new();
    for kind in ModelKind::ALL {
        if kind == ModelKind::ExtEmbLstm {
            continue; // needs a vector table, see external_embeddings
        }
        let config = ModelConfig::new(kind);
        let vocab = CharVocab::from_words(tr.words(), config.max_word_len)?;
        let mut model: Model = Model::build(config, vocab, None, seed)?;
        let history = train(&mut model, &tr, Some(&dev), &cfg)?;
        let last = history.epochs.last().expect("at least one epoch");
        println!("{:<12} final loss {:.3}", kind.name(), last.loss);
        reports.push(evaluate_model(&model, &test, kind.label())?);
    }
    print!("\n{}", format_report(&reports, ReportStyle::Text));
    Ok(())
}

pub fn run() -> Result<(), Box<dyn Error>> {
    run_with(600, 10)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
