//! Every crate example runs to completion.

#[path = "../examples/autograd.rs"]
mod autograd;
#[path = "../examples/coarse_grounding.rs"]
mod coarse_grounding;
#[path = "../examples/encoders.rs"]
mod encoders;
#[path = "../examples/evaluation.rs"]
mod evaluation;
#[path = "../examples/fine_grouping.rs"]
mod fine_grouping;
#[path = "../examples/proposals.rs"]
mod proposals;
#[path = "../examples/synthetic_corpus.rs"]
mod synthetic_corpus;
#[path = "../examples/train_pipeline.rs"]
mod train_pipeline;

use wstg::{Preset, TrainConfig};

#[test]
fn autograd_gradients_check_out() {
    assert!(autograd::run_example().unwrap() < 1e-4);
}

#[test]
fn encoders_produce_expected_shapes() {
    assert_eq!(encoders::run_example().unwrap(), (vec![12, 16], vec![1, 16]));
}

#[test]
fn proposals_cover_each_video() {
    assert!(proposals::run_example().unwrap().iter().all(|&n| n >= 1));
}

#[test]
fn coarse_grounding_picks_a_proposal() {
    coarse_grounding::run_example().unwrap();
}

#[test]
fn fine_grouping_stays_in_window() {
    let s = fine_grouping::run_example().unwrap();
    assert!(9 <= s.start && s.end <= 28);
}

#[test]
fn evaluation_report() {
    let r = evaluation::run_example().unwrap();
    assert_eq!(r.queries, 3);
}

#[test]
fn synthetic_corpus_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(synthetic_corpus::run_example(dir.path()).unwrap() > 0);
}

#[test]
fn train_pipeline_runs() {
    let config = TrainConfig {
        hidden_size: 4,
        embed_dim: 4,
        coarse_epochs: 1,
        fine_epochs: 1,
        ..TrainConfig::preset(Preset::Desk)
    };
    let (random, coarse, full) = train_pipeline::run_example(0, config).unwrap();
    assert_eq!(random.queries, 50);
    assert_eq!(coarse.queries, full.queries);
}
