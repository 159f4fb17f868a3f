//! Trains both stages on the default synthetic corpus with the desk preset
//! and compares random, coarse-only and full grounding on the test split.
//!
//! `cargo run --release --example train_pipeline [seed] [key=value ...]`

use std::time::Instant;

use wstg::checkpoint::Stage;
use wstg::dataset::{generate_corpus, Split};
use wstg::eval::random_baseline;
use wstg::train::{train_coarse, train_fine};
use wstg::{CorpusSpec, EvalReport, Grounder, Mode, Preset, Result, Segment, TrainConfig};

pub fn run_example(seed: u64, config: TrainConfig) -> Result<(EvalReport, EvalReport, EvalReport)> {
    let corpus = generate_corpus(&CorpusSpec::default())?;
    let train_ids = corpus.split_ids(Split::Train);
    let test_ids = corpus.split_ids(Split::Test);
    let view = corpus.training_view(&train_ids);
    let config = TrainConfig { seed, ..config };

    let (coarse, _) = train_coarse(&view, &config)?;
    let (fine, _) = train_fine(&view, &coarse, &config)?;
    let grounder = Grounder::from_checkpoint(&fine)?;
    assert_eq!(grounder.stage, Stage::Fine);

    let gts = corpus.ground_truths(&test_ids);
    let mut coarse_preds: Vec<Segment> = Vec::new();
    let mut full_preds: Vec<Segment> = Vec::new();
    let mut proposal_sets = Vec::new();
    for &q in &test_ids {
        let query = &corpus.queries[q];
        let video = corpus.video(&query.video_id).expect("indexed video");
        let p = grounder.ground(&video.features, &query.tokens, Mode::Full)?;
        coarse_preds.push(p.coarse.best);
        full_preds.push(p.segment);
        proposal_sets.push(grounder.proposals(video.frames())?);
    }
    let eta = &config.iou_thresholds;
    let random = random_baseline(&proposal_sets, &gts, eta, seed)?;
    let coarse = EvalReport::evaluate(&coarse_preds, &gts, eta)?;
    let full = EvalReport::evaluate(&full_preds, &gts, eta)?;
    Ok((random, coarse, full))
}

#[allow(dead_code)]
fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter("WSTG_LOG")).init();
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut config = TrainConfig::preset(Preset::Desk);
    for kv in args {
        let (k, v) = kv.split_once('=').expect("overrides are key=value");
        config.set(k, v)?;
    }
    let start = Instant::now();
    let (random, coarse, full) = run_example(seed, config)?;
    println!("{}", EvalReport::table(&[("random", &random), ("coarse", &coarse), ("full", &full)]));
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
