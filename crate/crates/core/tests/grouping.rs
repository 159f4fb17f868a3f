mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstg::fine::FrameScores;
use wstg::grouping::{default_thresholds, group, normalize, watershed_candidates};
use wstg::Segment;

fn random_scores(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.random_range(1..=50);
    // coarse quantization produces ties and plateaus
    let levels = rng.random_range(2..12);
    (0..n).map(|_| rng.random_range(0..levels) as f64 / (levels - 1) as f64).collect()
}

#[test]
fn candidates_match_sweep_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let thresholds = default_thresholds();
    for _ in 0..500 {
        let raw = random_scores(&mut rng);
        let window = Segment { start: 0, end: raw.len() - 1 };
        let n = normalize(&FrameScores { window, values: raw.clone() }).unwrap();
        let got = watershed_candidates(&n, &thresholds).unwrap();
        assert_eq!(got, common::sweep_oracle(&n.values, &thresholds), "{raw:?}");
    }
}

#[test]
fn grouping_matches_regroup_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let thresholds = default_thresholds();
    for _ in 0..500 {
        let raw: Vec<f64> = (0..rng.random_range(1..=50)).map(|_| rng.random_range(-2.0..2.0)).collect();
        let start = rng.random_range(0..20);
        let window = Segment { start, end: start + raw.len() - 1 };
        let fallback = Segment { start, end: start };
        let got = group(&FrameScores { window, values: raw.clone() }, &thresholds, fallback).unwrap();
        assert_eq!(got, common::regroup_oracle(&raw, window, &thresholds, fallback));
    }
}
