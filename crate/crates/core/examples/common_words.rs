//! Separating words shared by Wolayta and Gofa from language-specific ones.
//!
//! ```bash
//! cargo run --example common_words
//! ```

use std::error::Error;
use std::path::Path;

use wolgof::corpus::{dedupe_common, load_word_list};

pub fn run() -> Result<(), Box<dyn Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    // Word lists are cleaned on load: "Bayii?" becomes "bayii".
    let wolayta = load_word_list(fixtures.join("wolayta_sample.txt"))?;
    let gofa = load_word_list(fixtures.join("gofa_sample.txt"))?;

    let split = dedupe_common(&wolayta, &gofa);
    println!("wal-gof candidates: {:?}", split.common);
    println!("only in Wolayta:    {:?}", split.a_only);
    println!("only in Gofa:       {:?}", split.b_only);
    assert!(["kaallidi", "biittaa", "iita", "daro"]
        .iter()
        .all(|w| split.common.contains(*w)));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
