//! Raw text to a labeled, split corpus.
//!
//! ```bash
//! cargo run --example clean_and_split
//! ```

use std::error::Error;
use std::path::Path;

use wolgof::corpus::{clean_text, load_corpus, shuffle_split, tokenize};

pub fn run() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let raw = std::fs::read_to_string(fixtures.join("raw_sample.txt"))?;
    for line in raw.lines().filter(|l| !l.trim().is_empty()) {
        let cleaned = clean_text(line);
        println!("{line:?}\n  -> {:?}", tokenize(&cleaned));
        // Cleaning twice changes nothing.
        assert_eq!(clean_text(&cleaned), cleaned);
    }

    let corpus = load_corpus(fixtures.join("table1.tsv"))?;
    println!("\n{} labeled words\n{}", corpus.len(), corpus.stats());

    let (train, dev, test) = shuffle_split(&corpus, 42, (0.6, 0.2, 0.2))?;
    println!("seed 42 split: train {} / dev {} / test {}", train.len(), dev.len(), test.len());
    for item in &test.items {
        println!("  test: {}\t{}", item.word, item.tag);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
