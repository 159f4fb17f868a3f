//! Temporal IoU, recall at IoU thresholds, mIoU, and the random-proposal
//! baseline.
//!
//! `cargo run --example evaluation`

use wstg::eval::{random_baseline, temporal_iou};
use wstg::proposal::generate;
use wstg::{EvalReport, Result, Segment, WindowConfig};

pub fn run_example() -> Result<EvalReport> {
    let seg = |s, e| Segment { start: s, end: e };
    println!("iou([0,9],[5,14]) = {:.4}", temporal_iou(seg(0, 9), seg(5, 14)));

    let gts = [seg(10, 19), seg(0, 4), seg(30, 49)];
    let predictions = [seg(12, 21), seg(6, 9), seg(28, 47)];
    let thresholds = [0.1, 0.3, 0.5, 0.7];
    let model = EvalReport::evaluate(&predictions, &gts, &thresholds)?;

    let windows = WindowConfig::new(40.0);
    let sets = [generate(40, &windows)?, generate(20, &windows)?, generate(60, &windows)?];
    let random = random_baseline(&sets, &gts, &thresholds, 7)?;
    print!("{}", EvalReport::table(&[("random", &random), ("model", &model)]));
    print!("{}", model.to_csv());
    Ok(model)
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example().map(|_| ())
}
