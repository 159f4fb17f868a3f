//! Scores every proposal of one video against a sentence with an untrained
//! coarse stage, evaluates the MIL loss for both labels, and picks the best
//! proposal.
//!
//! `cargo run --example coarse_grounding`

use wstg::coarse::{coarse_loss, score_pairs, CoarseResult, PairLabel};
use wstg::dataset::generate_corpus;
use wstg::model::Model;
use wstg::proposal::generate;
use wstg::{CorpusSpec, Graph, Result, Segment, WindowConfig};

pub fn run_example() -> Result<Segment> {
    let corpus = generate_corpus(&CorpusSpec {
        n_videos: 4,
        n_test: 1,
        ..CorpusSpec::default()
    })?;
    let query = &corpus.queries[0];
    let video = corpus.video(&query.video_id).expect("generated video");
    let model = Model::new(corpus.feature_dim(), corpus.vocab.len(), 8, 8, 1)?;
    let proposals = generate(video.frames(), &WindowConfig::new(48.0))?;

    let mut g = Graph::new();
    let states = model.encode_video(&mut g, &video.features)?;
    let sentence = model.encode_sentence(&mut g, &query.tokens)?;
    let mapped = model.coarse.map_frames(&mut g, &model.store, states)?;
    let feature = model.coarse.sentence_feature(&mut g, &model.store, sentence)?;
    let streams = model
        .coarse
        .score(&mut g, &model.store, mapped, feature, &proposals.segments())?;
    let aligned = coarse_loss(&mut g, streams.scores, PairLabel::Aligned)?;
    let misaligned = coarse_loss(&mut g, streams.scores, PairLabel::Misaligned)?;
    println!(
        "{} proposals; loss if aligned {:.4}, if misaligned {:.4}",
        proposals.len(),
        g.value(aligned).item()?,
        g.value(misaligned).item()?
    );

    let result = CoarseResult::from_scores(score_pairs(&g, streams.scores), &proposals)?;
    println!("m_sum = {:.4?}, m_max = {:.4?}", result.m_sum, result.m_max);
    println!("best proposal {} (ground truth {})", result.best, corpus.ground_truth(0));
    Ok(result.best)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
