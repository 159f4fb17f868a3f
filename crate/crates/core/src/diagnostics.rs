//! Finite-difference gradient suite over every differentiable operation and
//! the two training losses, on small seeded random instances.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::coarse::{coarse_loss, PairLabel};
use crate::error::Result;
use crate::fine::{expand, fine_loss, video_sentence_score};
use crate::model::Model;
use crate::proposal::Segment;
use crate::tensor::gradcheck::{all_coords, check, check_params, GradCheckReport, Tolerance};
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Aggregate result of one suite case over all seeds.
#[derive(Clone, Debug)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub instances: usize,
    pub report: GradCheckReport,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

type Case = fn(u64, Tolerance) -> Result<GradCheckReport>;

/// Parameter coordinates sampled per instance for the model-level cases.
const COORDS_PER_INSTANCE: usize = 48;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Scalarizes `out` with fixed random weights so that every output entry
/// influences the loss differently.
fn weighted_sum(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let mut r = rng(seed ^ 0x5eed);
    let w = random(&mut r, g.shape(out));
    let w = g.constant(w);
    let prod = g.mul(out, w)?;
    Ok(g.sum(prod))
}

fn op_case(seed: u64, tol: Tolerance, shapes: &[&[usize]], f: impl Fn(&mut Graph, &[Var]) -> Result<Var>) -> Result<GradCheckReport> {
    let mut r = rng(seed);
    let inputs: Vec<Tensor> = shapes.iter().map(|s| random(&mut r, s)).collect();
    check(&inputs, tol, |g, v| {
        let out = f(g, v)?;
        weighted_sum(g, out, seed)
    })
}

fn case_matmul(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[3, 4], &[4, 2]], |g, v| g.matmul(v[0], v[1]))
}

fn case_linear(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[3, 4], &[2, 4], &[2]], |g, v| g.linear(v[0], v[1], Some(v[2])))
}

fn case_elementwise(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[2, 3], &[2, 3], &[2, 3]], |g, v| {
        let s = g.add(v[0], v[1])?;
        let d = g.sub(s, v[2])?;
        g.mul(d, v[1])
    })
}

fn case_broadcast(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[3, 4], &[4], &[1, 4]], |g, v| {
        let a = g.add_row(v[0], v[1])?;
        let r = g.repeat_rows(v[2], 3)?;
        let s = g.scale(r, 0.7);
        let s = g.add_scalar(s, 0.3);
        g.mul(a, s)
    })
}

fn case_sigmoid(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[2, 5]], |g, v| {
        let x = g.scale(v[0], 3.0);
        Ok(g.sigmoid(x))
    })
}

fn case_tanh(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[2, 5]], |g, v| {
        let x = g.scale(v[0], 3.0);
        Ok(g.tanh(x))
    })
}

fn case_log(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[2, 3]], |g, v| {
        // sigmoid keeps the argument positive
        let x = g.sigmoid(v[0]);
        g.log(x)
    })
}

fn case_relu(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    let mut r = rng(seed);
    // keep entries away from the kink
    let data = (0..6)
        .map(|_| {
            let m: f64 = r.random_range(0.1..1.0);
            if r.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let x = Tensor::matrix(2, 3, data)?;
    check(&[x], tol, |g, v| {
        let y = g.relu(v[0]);
        weighted_sum(g, y, seed)
    })
}

fn case_softmax(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[3, 4]], |g, v| {
        let a = g.softmax(v[0], 0)?;
        let b = g.softmax(v[0], 1)?;
        g.add(a, b)
    })
}

fn case_concat_slice(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[2, 3], &[2, 2], &[1, 5]], |g, v| {
        let wide = g.concat(&[v[0], v[1]], 1)?;
        let tall = g.concat(&[wide, v[2]], 0)?;
        let mid = g.slice(tall, 0, 1, 2)?;
        g.slice(mid, 1, 1, 3)
    })
}

fn case_max(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[4, 3]], |g, v| {
        let a = g.max_axis(v[0], 0)?;
        let b = g.max_axis(v[0], 1)?;
        let a = g.reshape(a, &[3])?;
        let b = g.reshape(b, &[4])?;
        let a = g.sum(a);
        let b = g.sum(b);
        g.add(a, b)
    })
}

fn case_sum_gather(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    op_case(seed, tol, &[&[5, 3]], |g, v| {
        let rows = g.gather_rows(v[0], &[4, 0, 4, 2])?;
        g.sum_axis(rows, 0)
    })
}

fn small_model(seed: u64) -> Result<Model> {
    Model::new(3, 6, 4, 8, seed)
}

fn sample_coords(store: &ParamStore, prefixes: &[&str], seed: u64) -> Vec<(ParamId, usize)> {
    let coords: Vec<_> = all_coords(store)
        .into_iter()
        .filter(|(id, _)| prefixes.iter().any(|p| store.get(*id).name.starts_with(p)))
        .collect();
    if coords.len() <= COORDS_PER_INSTANCE {
        return coords;
    }
    let mut r = rng(seed ^ 0xc00d);
    let mut picked: Vec<usize> = sample(&mut r, coords.len(), COORDS_PER_INSTANCE).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| coords[i]).collect()
}

fn case_encoders(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    let mut model = small_model(seed)?;
    let mut r = rng(seed);
    let frames = random(&mut r, &[4, 3]);
    let tokens: Vec<usize> = (0..3).map(|_| r.random_range(0..6)).collect();
    let coords = sample_coords(&model.store, &["encoder."], seed);
    let (video, text) = (model.video, model.text);
    check_params(&mut model.store, &coords, tol, |g, store| {
        let x = g.constant(frames.clone());
        let v = video.encode(g, store, x)?.states;
        let s = text.encode(g, store, &tokens)?.vector;
        let a = weighted_sum(g, v, seed)?;
        let b = weighted_sum(g, s, seed ^ 1)?;
        g.add(a, b)
    })
}

fn case_coarse_loss(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    let mut model = small_model(seed)?;
    let mut r = rng(seed);
    let frames = random(&mut r, &[6, 3]);
    let tokens: Vec<usize> = (0..3).map(|_| r.random_range(0..6)).collect();
    let label = if seed % 2 == 0 { PairLabel::Aligned } else { PairLabel::Misaligned };
    let proposals = [Segment { start: 0, end: 2 }, Segment { start: 2, end: 4 }, Segment { start: 3, end: 5 }];
    let coords = sample_coords(&model.store, &["encoder.", "coarse."], seed);
    let (video, text, head) = (model.video, model.text, model.coarse);
    check_params(&mut model.store, &coords, tol, |g, store| {
        let x = g.constant(frames.clone());
        let states = video.encode(g, store, x)?.states;
        let hs = text.encode(g, store, &tokens)?.vector;
        let mapped = head.map_frames(g, store, states)?;
        let fs = head.sentence_feature(g, store, hs)?;
        let streams = head.score(g, store, mapped, fs, &proposals)?;
        coarse_loss(g, streams.scores, label)
    })
}

fn case_fine_loss(seed: u64, tol: Tolerance) -> Result<GradCheckReport> {
    let mut model = small_model(seed)?;
    let mut r = rng(seed);
    let states: Vec<Tensor> = (0..3).map(|_| random(&mut r, &[7, 16])).collect();
    let sentence = random(&mut r, &[1, 16]);
    let window = expand(Segment { start: 2, end: 4 }, 0.5, 7)?;
    model.store.freeze_prefixes(&["encoder.", "coarse."]);
    let coords = sample_coords(&model.store, &["fine."], seed);
    let head = model.fine;
    // a wide margin keeps both hinges active
    let margin = 25.0;
    check_params(&mut model.store, &coords, tol, |g, store| {
        let hs = g.constant(sentence.clone());
        let mut scores = Vec::new();
        for s in &states {
            let v = g.constant(s.clone());
            let per_frame = head.frame_scores(g, store, v, hs, &window)?;
            scores.push(video_sentence_score(g, per_frame)?);
        }
        fine_loss(g, scores[0], scores[1], scores[2], margin)
    })
}

pub const CASES: &[(&str, Case)] = &[
    ("matmul", case_matmul),
    ("linear", case_linear),
    ("add/sub/mul", case_elementwise),
    ("broadcast/scale", case_broadcast),
    ("sigmoid", case_sigmoid),
    ("tanh", case_tanh),
    ("log", case_log),
    ("relu", case_relu),
    ("softmax", case_softmax),
    ("concat/slice", case_concat_slice),
    ("max", case_max),
    ("gather/sum", case_sum_gather),
    ("bilstm encoders", case_encoders),
    ("coarse MIL loss", case_coarse_loss),
    ("fine ranking loss", case_fine_loss),
];

/// Runs every case on `seeds` instances (seeds `0..seeds`).
pub fn gradient_suite(seeds: u64, tol: Tolerance) -> Result<Vec<SuiteEntry>> {
    CASES
        .iter()
        .map(|&(name, case)| {
            let mut report = GradCheckReport {
                checked: 0,
                max_rel_err: 0.0,
                max_abs_err: 0.0,
                failures: 0,
            };
            for seed in 0..seeds {
                report.merge(&case(seed, tol)?);
            }
            Ok(SuiteEntry {
                name,
                instances: seeds as usize,
                report,
            })
        })
        .collect()
}
