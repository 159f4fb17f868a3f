//! Expands a coarse segment, scores its frames with an untrained fine stage,
//! and groups the scores into the final segment.
//!
//! `cargo run --example fine_grouping`

use wstg::fine::{expand, read_frame_scores};
use wstg::grouping::{default_thresholds, group, normalize, watershed_candidates};
use wstg::model::Model;
use wstg::{Graph, Result, Segment, Tensor};

pub fn run_example() -> Result<Segment> {
    let frames = 40;
    let model = Model::new(4, 6, 4, 6, 3)?;
    let features = Tensor::matrix(frames, 4, (0..frames * 4).map(|i| (i as f64 * 0.17).cos()).collect())?;
    let coarse = Segment::new(14, 23)?;
    let expanded = expand(coarse, 0.5, frames)?;
    println!("coarse {coarse} expanded to {}", expanded.window);

    let mut g = Graph::new();
    let states = model.encode_video(&mut g, &features)?;
    let sentence = model.encode_sentence(&mut g, &[1, 2, 5])?;
    let scores = model.fine.frame_scores(&mut g, &model.store, states, sentence, &expanded)?;
    let raw = read_frame_scores(&g, scores, expanded.window);

    let normalized = normalize(&raw)?;
    let thresholds = default_thresholds();
    let candidates = watershed_candidates(&normalized, &thresholds)?;
    println!("{} candidate runs over {} thresholds", candidates.len(), thresholds.len());
    let segment = group(&raw, &thresholds, coarse)?;
    println!("grouped segment {segment}");
    Ok(segment)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
