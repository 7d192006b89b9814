//! Three annotators, majority vote, adjudication and a gold corpus.
//!
//! ```bash
//! cargo run --example annotation_workflow
//! ```

use std::error::Error;

use wolgof::annotation::{majority_vote, AnnotationStore};
use wolgof::corpus::{format_corpus, Tag};

pub fn run() -> Result<(), Box<dyn Error>> {
    use Tag::*;
    // Two of three must agree.
    println!("{:?}", majority_vote(&[Wal, Wal, Gof])?);
    println!("{:?}", majority_vote(&[Wal, Gof, WalGof])?);

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("labels.jsonl");
    let annotators: Vec<String> = ["almaz", "dawit", "hana"].map(String::from).to_vec();
    let mut store = AnnotationStore::create(&path, &annotators)?;
    store.import_words(["asa", "hintte", "kaallidi", "hara", "giddiis"], 1)?;
    let ids: Vec<String> = store.items().map(|i| i.item_id).collect();

    let votes = [
        [Wal, Wal, Wal],
        [Gof, Gof, Wal],
        [Wal, Gof, WalGof],
        [WalGof, WalGof, Gof],
    ];
    for (id, triple) in ids.iter().zip(votes) {
        for (who, tag) in annotators.iter().zip(triple) {
            store.record_label(id, who, tag, false)?;
        }
    }
    // The last word has one vote so far.
    store.record_label(&ids[4], "almaz", Wal, false)?;

    println!("\nprogress: {}", store.progress().to_json());
    for d in store.disagreements() {
        println!("needs adjudication: {} ({})", d.word, d.item_id);
    }
    let agreement = store.agreement_stats();
    for pair in &agreement.pairs {
        println!("{} / {}: {:?}", pair.first, pair.second, pair.agreement);
    }

    store.adjudicate(&ids[2], WalGof, "reviewer")?;
    drop(store);

    // The log replays to the same state.
    let store = AnnotationStore::open(&path)?;
    let merged = store.merge_annotations();
    print!("\ngold corpus:\n{}", format_corpus(&merged.corpus));
    println!("still pending: {:?}", merged.pending);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
