//! Runs the examples so they cannot rot.

#[path = "../examples/annotation_server.rs"]
mod annotation_server;
#[path = "../examples/annotation_workflow.rs"]
mod annotation_workflow;
#[path = "../examples/autodiff_basics.rs"]
mod autodiff_basics;
#[path = "../examples/checkpoint_roundtrip.rs"]
mod checkpoint_roundtrip;
#[path = "../examples/clean_and_split.rs"]
mod clean_and_split;
#[path = "../examples/common_words.rs"]
mod common_words;
#[path = "../examples/evaluation_report.rs"]
mod evaluation_report;
#[path = "../examples/external_embeddings.rs"]
mod external_embeddings;
#[path = "../examples/gradient_check.rs"]
mod gradient_check;
#[path = "../examples/logreg_features.rs"]
mod logreg_features;
#[path = "../examples/train_char_models.rs"]
mod train_char_models;

#[test]
fn annotation_examples() {
    annotation_workflow::run().unwrap();
    annotation_server::run().unwrap();
}

#[test]
fn corpus_examples() {
    clean_and_split::run().unwrap();
    common_words::run().unwrap();
}

#[test]
fn engine_examples() {
    autodiff_basics::run().unwrap();
    gradient_check::run().unwrap();
}

#[test]
fn model_examples() {
    logreg_features::run().unwrap();
    checkpoint_roundtrip::run().unwrap();
    external_embeddings::run().unwrap();
    evaluation_report::run().unwrap();
}

#[test]
fn training_example_at_small_scale() {
    train_char_models::run_with(90, 2).unwrap();
}
