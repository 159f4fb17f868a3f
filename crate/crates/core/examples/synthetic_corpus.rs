//! Generates the synthetic corpus, writes it to disk, reads it back, and
//! builds one epoch of training batches.
//!
//! `cargo run --example synthetic_corpus [dir]`

use wstg::dataset::{generate_corpus, load_corpus, make_batches, save_corpus, Split};
use wstg::{CorpusSpec, Result};

pub fn run_example(dir: &std::path::Path) -> Result<usize> {
    let corpus = generate_corpus(&CorpusSpec::default())?;
    save_corpus(&corpus, dir)?;
    let loaded = load_corpus(dir)?;
    assert_eq!(loaded, corpus);

    let train = loaded.split_ids(Split::Train);
    let test = loaded.split_ids(Split::Test);
    println!("{} videos: {} train, {} test queries", loaded.videos.len(), train.len(), test.len());
    let q = &loaded.queries[0];
    let v = loaded.video(&q.video_id).expect("video exists");
    println!(
        "{}: {} frames, tokens {:?}, planted segment {}",
        v.id,
        v.frames(),
        q.tokens,
        loaded.ground_truth(0)
    );

    let batches = make_batches(&train, 16, 0)?;
    let negatives = batches[0].negatives(0, &loaded.queries).count();
    println!("{} batches; pair 0 of batch 0 has {negatives} in-batch negatives", batches.len());
    Ok(batches.len())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    run_example(std::path::Path::new(&dir)).map(|_| ())
}
