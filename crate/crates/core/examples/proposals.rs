//! Multi-scale sliding-window proposals for a few video lengths.
//!
//! `cargo run --example proposals`

use wstg::proposal::generate;
use wstg::{Result, WindowConfig};

pub fn run_example() -> Result<Vec<usize>> {
    let config = WindowConfig::new(48.0);
    println!("window lengths for l_v = 48: {:?}", config.window_lengths());
    let mut counts = Vec::new();
    for frames in [5, 32, 64] {
        let set = generate(frames, &config)?;
        let shown: Vec<String> = set.segments().iter().take(6).map(|s| s.to_string()).collect();
        println!("T = {frames:>2}: {:>3} proposals, first {}", set.len(), shown.join(" "));
        counts.push(set.len());
    }
    Ok(counts)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
