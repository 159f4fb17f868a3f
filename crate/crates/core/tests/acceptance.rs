//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.
//!
//! `cargo test --release --test acceptance`

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wstg::coarse::{bag_scores, score_pairs};
use wstg::dataset::{generate_corpus, Split};
use wstg::diagnostics::{gradient_suite, CASES};
use wstg::eval::{random_baseline, temporal_iou};
use wstg::fine::expand;
use wstg::grouping::{default_thresholds, group, normalize, watershed_candidates};
use wstg::model::Model;
use wstg::predictions::{frame_scores_to_tsv, read_frame_scores};
use wstg::proposal::generate;
use wstg::tensor::gradcheck::Tolerance;
use wstg::train::{train_coarse, train_fine};
use wstg::{Corpus, CorpusSpec, EvalReport, Graph, Grounder, Mode, Prediction, Preset, Segment, Tensor, TrainConfig, WindowConfig};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let entries = gradient_suite(50, Tolerance::default()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(entries.len() == CASES.len(), || "missing suite cases".into())?;
    for e in &entries {
        ensure(e.instances >= 50, || format!("{}: only {} instances", e.name, e.instances))?;
        ensure(e.passed(), || {
            format!("{}: {} failures, max rel err {:.2e}", e.name, e.report.failures, e.report.max_rel_err)
        })?;
    }
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    let checked: usize = entries.iter().map(|e| e.report.checked).sum();
    Ok(format!("{} cases x 50 seeds, {checked} entries, {secs:.2}s", entries.len()))
}

fn softmax_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let hidden = rng.random_range(2..10);
        let model = Model::new(3, 5, 4, hidden, i).map_err(|e| e.to_string())?;
        let frames = rng.random_range(1..40);
        let windows = WindowConfig::new(rng.random_range(4.0..60.0));
        let proposals = generate(frames, &windows).map_err(|e| e.to_string())?.segments();
        let spread = rng.random_range(0.1..20.0);
        let data: Vec<f64> = (0..frames * hidden).map(|_| rng.random_range(-spread..spread)).collect();
        let sent: Vec<f64> = (0..hidden).map(|_| rng.random_range(-spread..spread)).collect();

        let mut g = Graph::new();
        let mapped = g.constant(Tensor::matrix(frames, hidden, data).unwrap());
        let sentence = g.constant(Tensor::matrix(1, hidden, sent).unwrap());
        let s = model
            .coarse
            .score(&mut g, &model.store, mapped, sentence, &proposals)
            .map_err(|e| e.to_string())?;
        let k = proposals.len();
        let cls = g.value(s.classification).data().to_vec();
        let slc = g.value(s.selection).data().to_vec();
        for r in 0..k {
            worst = worst.max((cls[2 * r] + cls[2 * r + 1] - 1.0).abs());
        }
        for c in 0..2 {
            let col: f64 = (0..k).map(|r| slc[2 * r + c]).sum();
            worst = worst.max((col - 1.0).abs());
        }
        let (m_sum, _) = bag_scores(&score_pairs(&g, s.scores)).unwrap();
        for m in m_sum {
            ensure(m > 0.0 && m <= 1.0 + 1e-12, || format!("instance {i}: m_sum {m}"))?;
        }
    }
    ensure(worst <= 1e-12, || format!("sum deviation {worst:e}"))?;
    Ok(format!("1000 matrices, worst sum deviation {worst:.1e}"))
}

fn proposals() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..200 {
        let frames = rng.random_range(1..150);
        let config = WindowConfig {
            avg_train_length: rng.random_range(1.0..200.0),
            scale_fractions: (0..rng.random_range(1..4)).map(|_| rng.random_range(0.01..=1.0)).collect(),
            overlap: rng.random_range(0.0..0.95),
        };
        let got: Vec<(usize, usize)> = generate(frames, &config)
            .map_err(|e| e.to_string())?
            .segments()
            .iter()
            .map(|s| (s.start, s.end))
            .collect();
        let want: Vec<_> = common::brute_force_proposals(frames, config.avg_train_length, &config.scale_fractions, config.overlap)
            .into_iter()
            .collect();
        ensure(got == want, || format!("instance {i}: T={frames} {config:?}"))?;
    }
    Ok("200 instances identical to brute force".into())
}

fn watershed() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let thresholds = default_thresholds();
    for i in 0..500 {
        let n = rng.random_range(1..=50);
        let levels = rng.random_range(2..12);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / (levels - 1) as f64).collect();
        let window = Segment { start: 0, end: n - 1 };
        let norm = normalize(&wstg::fine::FrameScores { window, values: raw }).map_err(|e| e.to_string())?;
        let got = watershed_candidates(&norm, &thresholds).map_err(|e| e.to_string())?;
        ensure(got == common::sweep_oracle(&norm.values, &thresholds), || format!("vector {i}"))?;
    }
    Ok("500 vectors identical to the sweep oracle".into())
}

fn expansion() -> Outcome {
    let anet = TrainConfig::preset(Preset::ActivityNet).lambda;
    let charades = TrainConfig::parse("preset=charades").map_err(|e| e.to_string())?.lambda;
    ensure(anet == 1.8 && charades == 0.5, || format!("preset lambdas {anet}, {charades}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..1000 {
        let frames = rng.random_range(1..200usize);
        let start = rng.random_range(0..frames);
        let end = rng.random_range(start..frames);
        let source = Segment { start, end };
        let l1 = rng.random_range(0.0..3.0);
        let l2 = l1 + rng.random_range(0.0..3.0);
        let a = expand(source, l1, frames).map_err(|e| e.to_string())?.window;
        let b = expand(source, l2, frames).map_err(|e| e.to_string())?.window;
        ensure(b.contains(&a) && a.contains(&source), || format!("triple {i}: not monotone"))?;
        let grow = (l1 * source.len() as f64).round() as i64;
        let want_start = (start as i64 - grow).max(0) as usize;
        let want_end = (end as i64 + grow).min(frames as i64 - 1) as usize;
        ensure(a == Segment { start: want_start, end: want_end }, || format!("triple {i}: clamp {a} for {source} T={frames}"))?;
    }
    Ok("1000 triples; preset lambdas 1.8 / 0.5".into())
}

fn iou() -> Outcome {
    let seg = |s, e| Segment { start: s, end: e };
    ensure(temporal_iou(seg(3, 8), seg(3, 8)) == 1.0, || "identical".into())?;
    ensure(temporal_iou(seg(0, 4), seg(5, 9)) == 0.0, || "disjoint".into())?;
    ensure(temporal_iou(seg(0, 9), seg(5, 14)) == 5.0 / 15.0, || "[0,9] vs [5,14]".into())?;

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let random = |rng: &mut ChaCha8Rng| {
        let s = rng.random_range(0..100);
        seg(s, rng.random_range(s..120))
    };
    for i in 0..1000 {
        let a = random(&mut rng);
        let b = random(&mut rng);
        let ab = temporal_iou(a, b);
        ensure(ab == temporal_iou(b, a) && (0.0..=1.0).contains(&ab), || format!("pair {i}: {a} {b}"))?;
        // a nested in its hull with b
        let hull = seg(a.start.min(b.start), a.end.max(b.end));
        let nested = temporal_iou(a, hull);
        ensure(nested == a.len() as f64 / hull.len() as f64, || format!("pair {i}: nesting {a} {hull}"))?;
    }
    Ok("analytic examples exact; 1000 random pairs".into())
}

struct Run {
    seed: u64,
    secs: f64,
    coarse_ckpt: Vec<u8>,
    fine_ckpt: Vec<u8>,
    random: EvalReport,
    coarse: EvalReport,
    full: EvalReport,
    full_preds: Vec<Prediction>,
    coarse_only: Vec<Segment>,
}

fn train_and_evaluate(corpus: &Corpus, seed: u64) -> wstg::Result<Run> {
    let start = Instant::now();
    let config = TrainConfig {
        seed,
        ..TrainConfig::preset(Preset::Desk)
    };
    let train_ids = corpus.split_ids(Split::Train);
    let test_ids = corpus.split_ids(Split::Test);
    let view = corpus.training_view(&train_ids);
    let (coarse_ckpt, _) = train_coarse(&view, &config)?;
    let (fine_ckpt, _) = train_fine(&view, &coarse_ckpt, &config)?;
    let grounder = Grounder::from_checkpoint(&fine_ckpt)?;

    let mut full_preds = Vec::new();
    let mut coarse_only = Vec::new();
    let mut proposal_sets = Vec::new();
    for &q in &test_ids {
        let query = &corpus.queries[q];
        let video = corpus.video(&query.video_id).expect("indexed video");
        full_preds.push(grounder.ground(&video.features, &query.tokens, Mode::Full)?);
        coarse_only.push(grounder.ground(&video.features, &query.tokens, Mode::CoarseOnly)?.segment);
        proposal_sets.push(grounder.proposals(video.frames())?);
    }
    let gts = corpus.ground_truths(&test_ids);
    let eta = &config.iou_thresholds;
    let full_segments: Vec<Segment> = full_preds.iter().map(|p| p.segment).collect();
    Ok(Run {
        seed,
        secs: start.elapsed().as_secs_f64(),
        coarse_ckpt: coarse_ckpt.to_bytes(),
        fine_ckpt: fine_ckpt.to_bytes(),
        random: random_baseline(&proposal_sets, &gts, eta, seed)?,
        coarse: EvalReport::evaluate(&coarse_only, &gts, eta)?,
        full: EvalReport::evaluate(&full_segments, &gts, eta)?,
        full_preds,
        coarse_only,
    })
}

fn r03(r: &EvalReport) -> f64 {
    r.recall_at(0.3).expect("0.3 is a desk threshold") * 100.0
}

fn mil_sanity(runs: &[Run]) -> Outcome {
    let run = &runs[0];
    let (random, coarse) = (r03(&run.random), r03(&run.coarse));
    let clearing = runs.iter().filter(|r| r03(&r.coarse) - r03(&r.random) >= 20.0).count();
    let detail = format!(
        "seed {}: random {random:.1}, coarse {coarse:.1} R@1@0.3, {:.0}s (seeds clearing +20: {clearing}/{})",
        run.seed,
        run.secs,
        runs.len()
    );
    ensure(coarse - random >= 20.0 && run.secs <= 300.0, || detail.clone())?;
    Ok(detail)
}

fn refinement(runs: &[Run]) -> Outcome {
    let gains: Vec<f64> = runs.iter().map(|r| (r.full.miou - r.coarse.miou) * 100.0).collect();
    let held = gains.iter().filter(|&&g| g >= 2.0).count();
    let detail = format!(
        "mIoU gains {} ({held}/5 >= 2)",
        gains.iter().map(|g| format!("{g:+.1}")).collect::<Vec<_>>().join(" ")
    );
    ensure(held >= 4, || detail.clone())?;
    Ok(detail)
}

fn determinism(corpus: &Corpus, first: &Run) -> Outcome {
    let again = train_and_evaluate(corpus, first.seed).map_err(|e| e.to_string())?;
    ensure(again.coarse_ckpt == first.coarse_ckpt, || "coarse checkpoints differ".into())?;
    ensure(again.fine_ckpt == first.fine_ckpt, || "fine checkpoints differ".into())?;
    for (a, b) in [(&again.coarse, &first.coarse), (&again.full, &first.full), (&again.random, &first.random)] {
        ensure(a.to_csv() == b.to_csv(), || "reports differ".into())?;
    }
    Ok(format!("seed {}: checkpoints ({} + {} bytes) and reports identical", first.seed, first.coarse_ckpt.len(), first.fine_ckpt.len()))
}

fn consistency(runs: &[Run]) -> Outcome {
    let thresholds = default_thresholds();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for run in runs {
        let scores: Vec<_> = run
            .full_preds
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.frame_scores.as_ref().expect("full mode scores")))
            .collect();
        let path = dir.path().join(format!("scores_{}.tsv", run.seed));
        fs::write(&path, frame_scores_to_tsv(&scores)).map_err(|e| e.to_string())?;
        let dumped = read_frame_scores(&path).map_err(|e| e.to_string())?;

        for (i, (p, coarse)) in run.full_preds.iter().zip(&run.coarse_only).enumerate() {
            let window = p.expanded.expect("full mode window").window;
            ensure(window.contains(&p.segment), || format!("seed {} query {i}: {} outside {window}", run.seed, p.segment))?;
            ensure(p.coarse.best == *coarse, || format!("seed {} query {i}: coarse-only {coarse} vs {}", run.seed, p.coarse.best))?;
            let regrouped = group(&dumped[i].1, &thresholds, p.coarse.best).map_err(|e| e.to_string())?;
            ensure(regrouped == p.segment, || format!("seed {} query {i}: offline regroup differs", run.seed))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} test queries across {} runs", runs.len()))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 gradient suite", gradients()),
        ("2 softmax invariants", softmax_invariants()),
        ("3 proposal enumeration", proposals()),
        ("4 watershed candidates", watershed()),
        ("5 boundary expansion", expansion()),
        ("6 temporal IoU", iou()),
    ];

    let corpus = generate_corpus(&CorpusSpec::default()).expect("default corpus");
    let runs: Result<Vec<Run>, String> = (0..5).map(|s| train_and_evaluate(&corpus, s).map_err(|e| e.to_string())).collect();
    match runs {
        Ok(runs) => {
            results.push(("7 MIL learning sanity", mil_sanity(&runs)));
            results.push(("8 coarse-to-fine gain", refinement(&runs)));
            results.push(("9 determinism", determinism(&corpus, &runs[0])));
            results.push(("10 pipeline consistency", consistency(&runs)));
        }
        Err(e) => {
            for name in ["7 MIL learning sanity", "8 coarse-to-fine gain", "9 determinism", "10 pipeline consistency"] {
                results.push((name, Err(format!("training failed: {e}"))));
            }
        }
    }

    let mut failed = BTreeSet::new();
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name:<26} {detail}"),
            Err(detail) => {
                println!("FAIL  {name:<26} {detail}");
                failed.insert(*name);
            }
        }
    }
    if failed.is_empty() {
        println!("all {} criteria passed", results.len());
        ExitCode::SUCCESS
    } else {
        println!("{} of {} criteria failed", failed.len(), results.len());
        ExitCode::FAILURE
    }
}
