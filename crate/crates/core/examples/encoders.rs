//! Encodes a random frame sequence and a token sequence with the
//! bidirectional LSTM encoders.
//!
//! `cargo run --example encoders`

use wstg::model::Model;
use wstg::{Graph, Result, Tensor};

pub fn run_example() -> Result<(Vec<usize>, Vec<usize>)> {
    let (frames, dim, vocab, embed, hidden) = (12, 6, 10, 5, 8);
    let model = Model::new(dim, vocab, embed, hidden, 42)?;
    let features = Tensor::matrix(frames, dim, (0..frames * dim).map(|i| (i as f64 * 0.3).sin()).collect())?;

    let mut g = Graph::new();
    let states = model.encode_video(&mut g, &features)?;
    let sentence = model.encode_sentence(&mut g, &[3, 1, 4, 1, 5])?;
    println!("video states: {:?}", g.shape(states));
    println!("sentence vector: {:?}", g.shape(sentence));
    println!("first frame state: {:.3?}", g.value(states).row(0));
    Ok((g.shape(states).to_vec(), g.shape(sentence).to_vec()))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
