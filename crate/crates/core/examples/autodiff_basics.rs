//! The tensor engine on its own: build a graph, back-propagate, take Adam
//! steps.
//!
//! ```bash
//! cargo run --example autodiff_basics
//! ```

use std::error::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wolgof::nn::layers::Dense;
use wolgof::nn::{Adam, Graph, ParamStore, Tensor};

pub fn run() -> Result<(), Box<dyn Error>> {
    // Three points, three classes, one dense layer.
    let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]])?;
    let y = [0usize, 1, 2];

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::<f64>::new();
    let dense = Dense::new(&mut store, "dense", 2, 3, &mut rng);
    let mut adam = Adam::new(0.1);

    for step in 0..=60 {
        let mut g = Graph::new();
        let input = g.input(x.clone());
        let logits = dense.forward(&mut g, &store, input)?;
        let loss = g.softmax_cross_entropy(logits, &y)?;
        if step % 20 == 0 {
            println!("step {step:>2}: loss {:.4}", g.value(loss).item());
        }
        store.zero_grads();
        g.backward(loss, &mut store)?;
        adam.step(&mut store)?;
    }

    let mut g = Graph::new();
    let input = g.input(x);
    let logits = dense.forward(&mut g, &store, input)?;
    let probs = g.softmax(logits)?;
    for r in 0..3 {
        let row: Vec<String> = g.value(probs).row(r).iter().map(|p| format!("{p:.3}")).collect();
        println!("point {r}: [{}]", row.join(", "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run()
}
