//! Saves a trained model, restores it and checks that predictions agree
//! bit for bit.
//!
//! ```bash
//! cargo run --example checkpoint_roundtrip
//! ```

use std::error::Error;

use wolgof::corpus::load_corpus;
use wolgof::models::{train, CharVocab, Model, ModelConfig, ModelKind, TrainingConfig};

pub fn run() -> Result<(), Box<dyn Error>> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.tsv"))?;
    let config = ModelConfig::new(ModelKind::Cnn);
    let vocab = CharVocab::from_words(corpus.words(), config.max_word_len)?;
    let mut model: Model = Model::build(config, vocab, None, 9)?;
    let cfg = TrainingConfig {
        epochs: 10,
        seed: 9,
        ..TrainingConfig::default()
    };
    train(&mut model, &corpus, None, &cfg)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("cnn.json");
    model.save(&path, 9)?;
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    println!("manifest keys: {:?}", manifest.as_object().map(|m| m.keys().collect::<Vec<_>>()));

    let restored: Model = Model::load(&path, None)?;
    let words: Vec<&str> = corpus.words().collect();
    let before = model.predict_batch(&words)?;
    let after = restored.predict_batch(&words)?;
    for (a, b) in before.iter().zip(&after) {
        assert_eq!(a.probabilities, b.probabilities, "{}", a.word);
    }
    println!("{} predictions identical after reload", after.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
