//! Hashed character n-grams and the logistic-regression baseline.
//!
//! ```bash
//! cargo run --example logreg_features
//! ```

use std::error::Error;

use wolgof::models::{
    char_ngrams, evaluate_model, logreg_features, train, CharVocab, Model, ModelConfig, ModelKind,
    TrainingConfig,
};
use wolgof::synthetic::{generate, SyntheticSpec};
use wolgof::corpus::shuffle_split;

pub fn run() -> Result<(), Box<dyn Error>> {
    println!("n-grams of \"asa\": {:?}", char_ngrams("asa"));
    let features = logreg_features("asa", 1 << 10);
    println!("hashed into 1024 buckets: {features:?}");

    let corpus = generate(&SyntheticSpec::new(300, 0.3, 5))?;
    let (tr, dev, test) = shuffle_split(&corpus, 5, (0.7, 0.15, 0.15))?;
    let config = ModelConfig::new(ModelKind::LogReg);
    let vocab = CharVocab::from_words(tr.words(), config.max_word_len)?;
    let mut model: Model = Model::build(config, vocab, None, 5)?;
    let cfg = TrainingConfig {
        epochs: 15,
        lr: 0.01,
        seed: 5,
        ..TrainingConfig::default()
    };
    let history = train(&mut model, &tr, Some(&dev), &cfg)?;
    print!("\n{}", history.to_csv());
    let report = evaluate_model(&model, &test, "logreg")?;
    println!("held-out macro-F1 {:.3}, accuracy {:.3}", report.macro_avg.f1, report.accuracy);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
