//! The word-vector LSTM: a table of precomputed vectors, saved as text,
//! loaded back and used with and without a zero fallback for unseen words.
//!
//! ```bash
//! cargo run --example external_embeddings
//! ```

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wolgof::corpus::load_corpus;
use wolgof::models::{
    load_embedding_table, train, CharVocab, EmbeddingTable, Fallback, Model, ModelConfig, ModelKind,
    TrainingConfig,
};

pub fn run() -> Result<(), Box<dyn Error>> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/table1.tsv"))?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("vectors.txt");

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut table = EmbeddingTable::new(16);
    for w in corpus.words() {
        table.insert(w, (0..16).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    }
    table.save(&path)?;
    let table = load_embedding_table(&path)?;
    println!("loaded {} vectors of dimension {}", table.len(), table.dim());

    let mut config = ModelConfig::new(ModelKind::ExtEmbLstm);
    config.ext_embed_dim = table.dim();
    let vocab = CharVocab::from_words(corpus.words(), config.max_word_len)?;
    let mut model: Model = Model::build(config.clone(), vocab.clone(), Some(table.clone()), 2)?;
    let cfg = TrainingConfig {
        epochs: 60,
        lr: 0.01,
        seed: 2,
        ..TrainingConfig::default()
    };
    train(&mut model, &corpus, None, &cfg)?;
    for w in ["asa", "hintte", "doonan"] {
        let p = model.predict(w)?;
        println!("{w:<8} -> {}", p.tag);
    }

    // Strict lookup refuses a word with no vector.
    match model.predict("yeletay") {
        Err(e) => println!("strict table: {e}"),
        Ok(p) => println!("strict table unexpectedly predicted {}", p.tag),
    }
    let lenient = table.with_fallback(Fallback::ZeroVector);
    let mut model: Model = Model::build(config, vocab, Some(lenient), 2)?;
    train(&mut model, &corpus, None, &cfg)?;
    println!("zero fallback: yeletay -> {}", model.predict("yeletay")?.tag);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
