//! Two-stage training: the encoders and coarse stage with the MIL loss,
//! then the fine stage with the ranking loss while everything else is frozen.

use std::collections::HashMap;

use log::{debug, info};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{Checkpoint, Stage};
use crate::coarse::{coarse_loss, score_pairs, select_best, PairLabel};
use crate::config::TrainConfig;
use crate::dataset::{make_batches, TrainingView};
use crate::error::{Error, Result};
use crate::fine::{expand, hinge, video_sentence_score};
use crate::model::{Model, COARSE_PREFIXES};
use crate::optim::{clip_grad_norm, Adam};
use crate::proposal::{generate, ProposalSet, Segment};
use crate::tensor::{Graph, Tensor, Var};

/// Per-epoch record of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    /// Mean batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    /// Steps whose gradient norm exceeded the clip threshold.
    pub clipped_steps: usize,
    /// Batches with zero loss, which skip the update.
    pub skipped_steps: usize,
}

fn epoch_seed(seed: u64, stage: Stage, epoch: usize) -> u64 {
    let salt = match stage {
        Stage::Coarse => 0x00c0_a55e,
        Stage::Fine => 0x000f_1e5e,
    };
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ (salt << 32) ^ epoch as u64
}

struct Stepper {
    adam: Adam,
    clip: f64,
    log: TrainLog,
}

impl Stepper {
    fn new(model: &Model, config: &TrainConfig) -> Self {
        Stepper {
            adam: Adam::new(&model.store, config.lr, config.adam_beta1, config.adam_beta2, config.adam_eps),
            clip: config.grad_clip,
            log: TrainLog::default(),
        }
    }

    /// Backpropagates `loss` and applies one update; zero losses skip the update.
    fn step(&mut self, model: &mut Model, mut g: Graph, loss: Var) -> Result<f64> {
        let value = g.value(loss).item()?;
        if !value.is_finite() {
            return Err(Error::Domain(format!("non-finite training loss {value}")));
        }
        if value == 0.0 {
            self.log.skipped_steps += 1;
            return Ok(value);
        }
        g.backward(loss)?;
        g.accumulate_param_grads(&mut model.store);
        let norm = clip_grad_norm(&mut model.store, self.clip);
        if norm > self.clip {
            self.log.clipped_steps += 1;
            debug!("clipped gradient norm {norm:.3} to {}", self.clip);
        }
        self.adam.step(&mut model.store);
        model.store.zero_grad();
        self.log.steps += 1;
        Ok(value)
    }
}

fn sum_vars(g: &mut Graph, terms: &[Var]) -> Result<Var> {
    let mut total = *terms
        .first()
        .ok_or_else(|| Error::EmptyInput("no loss terms".into()))?;
    for &t in &terms[1..] {
        total = g.add(total, t)?;
    }
    Ok(total)
}

fn resolve_config(view: &TrainingView, config: &TrainConfig) -> Result<TrainConfig> {
    config.validate()?;
    if view.query_ids.len() < 2 {
        return Err(Error::Input("training needs at least two queries".into()));
    }
    let mut resolved = config.clone();
    if resolved.avg_train_length.is_none() {
        resolved.avg_train_length = Some(view.average_length());
    }
    resolved.validate()?;
    Ok(resolved)
}

fn proposals_by_video(view: &TrainingView, config: &TrainConfig) -> Result<HashMap<usize, ProposalSet>> {
    let windows = config.window_config(config.avg_train_length.expect("resolved"));
    let mut out = HashMap::new();
    for &q in view.query_ids {
        let v = view.video_position(q);
        if let std::collections::hash_map::Entry::Vacant(e) = out.entry(v) {
            e.insert(generate(view.videos[v].frames(), &windows)?);
        }
    }
    Ok(out)
}

/// Trains the encoders and the coarse stage from scratch.
///
/// Each aligned pair contributes the MIL loss with an aligned label, and its
/// video paired with another in-batch sentence (a cyclic shift of the batch)
/// contributes it with a misaligned label.
pub fn train_coarse(view: &TrainingView, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    let config = resolve_config(view, config)?;
    let mut model = Model::new(
        view.feature_dim(),
        view.vocab_size,
        config.embed_dim,
        config.hidden_size,
        config.seed,
    )?;
    model.store.freeze_prefixes(&["fine."]);
    let proposals = proposals_by_video(view, &config)?;
    let mut stepper = Stepper::new(&model, &config);

    for epoch in 0..config.coarse_epochs {
        let seed = epoch_seed(config.seed, Stage::Coarse, epoch);
        let batches = make_batches(view.query_ids, config.batch_size, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        for batch in &batches {
            let shift = rng.random_range(1..batch.len());
            let mut g = Graph::new();
            let store = &model.store;
            let mut mapped = Vec::with_capacity(batch.len());
            let mut sentences = Vec::with_capacity(batch.len());
            for &q in &batch.queries {
                let states = model.encode_video(&mut g, &view.video_of(q).features)?;
                mapped.push(model.coarse.map_frames(&mut g, store, states)?);
                let hs = model.encode_sentence(&mut g, &view.queries[q].tokens)?;
                sentences.push(model.coarse.sentence_feature(&mut g, store, hs)?);
            }
            let mut terms = Vec::with_capacity(2 * batch.len());
            for (i, &q) in batch.queries.iter().enumerate() {
                let segs = proposals[&view.video_position(q)].segments();
                let aligned = model.coarse.score(&mut g, store, mapped[i], sentences[i], &segs)?;
                terms.push(coarse_loss(&mut g, aligned.scores, PairLabel::Aligned)?);

                let j = (i + shift) % batch.len();
                if view.queries[batch.queries[j]].video_id != view.queries[q].video_id {
                    let mis = model.coarse.score(&mut g, store, mapped[i], sentences[j], &segs)?;
                    terms.push(coarse_loss(&mut g, mis.scores, PairLabel::Misaligned)?);
                }
            }
            let n = terms.len() as f64;
            let sum = sum_vars(&mut g, &terms)?;
            let loss = g.scale(sum, 1.0 / n);
            total += stepper.step(&mut model, g, loss)?;
        }
        let mean = total / batches.len().max(1) as f64;
        info!("coarse epoch {}/{}: loss {mean:.5}", epoch + 1, config.coarse_epochs);
        stepper.log.epoch_losses.push(mean);
    }

    model.store.unfreeze_all();
    let ckpt = Checkpoint {
        stage: Stage::Coarse,
        epoch: config.coarse_epochs as u32,
        config,
        params: model.store,
    };
    Ok((ckpt, stepper.log))
}

/// Frozen-encoder outputs reused across fine-stage epochs.
struct FrozenFeatures {
    /// Per video position: `T × 2H` states and the coarse `T × H` mapped frames.
    videos: HashMap<usize, (Tensor, Tensor)>,
    /// Per query: `1 × 2H` sentence vector and coarse `1 × H` feature.
    sentences: HashMap<usize, (Tensor, Tensor)>,
}

impl FrozenFeatures {
    fn compute(model: &Model, view: &TrainingView) -> Result<Self> {
        let store = &model.store;
        let mut videos = HashMap::new();
        let mut sentences = HashMap::new();
        for &q in view.query_ids {
            let v = view.video_position(q);
            if !videos.contains_key(&v) {
                let mut g = Graph::new();
                let states = model.encode_video(&mut g, &view.videos[v].features)?;
                let mapped = model.coarse.map_frames(&mut g, store, states)?;
                videos.insert(v, (g.value(states).clone(), g.value(mapped).clone()));
            }
            let mut g = Graph::new();
            let hs = model.encode_sentence(&mut g, &view.queries[q].tokens)?;
            let feat = model.coarse.sentence_feature(&mut g, store, hs)?;
            sentences.insert(q, (g.value(hs).clone(), g.value(feat).clone()));
        }
        Ok(FrozenFeatures { videos, sentences })
    }
}

/// Trains the fine stage on top of a coarse checkpoint. The encoders and the
/// coarse stage stay frozen; every (video, sentence) pair, aligned or not,
/// is scored inside the expanded window the coarse stage picks for it.
pub fn train_fine(view: &TrainingView, coarse: &Checkpoint, config: &TrainConfig) -> Result<(Checkpoint, TrainLog)> {
    if coarse.stage != Stage::Coarse {
        return Err(Error::Checkpoint(format!(
            "fine training starts from a coarse checkpoint, got stage `{}`",
            coarse.stage.as_str()
        )));
    }
    let mut config = config.clone();
    config.avg_train_length = coarse.config.avg_train_length;
    if config.hidden_size != coarse.config.hidden_size || config.embed_dim != coarse.config.embed_dim {
        return Err(Error::Config(format!(
            "model sizes (hidden {}, embed {}) differ from the coarse checkpoint (hidden {}, embed {})",
            config.hidden_size, config.embed_dim, coarse.config.hidden_size, coarse.config.embed_dim
        )));
    }
    let config = resolve_config(view, &config)?;
    let mut model = Model::bind(coarse.params.clone())?;
    model.store.freeze_prefixes(&COARSE_PREFIXES);

    let proposals = proposals_by_video(view, &config)?;
    let frozen = FrozenFeatures::compute(&model, view)?;
    let mut windows: HashMap<(usize, usize), Segment> = HashMap::new();
    let mut stepper = Stepper::new(&model, &config);

    for epoch in 0..config.fine_epochs {
        let seed = epoch_seed(config.seed, Stage::Fine, epoch);
        let batches = make_batches(view.query_ids, config.batch_size, seed)?;
        let mut total = 0.0;
        for batch in &batches {
            let vids: Vec<usize> = batch.queries.iter().map(|&q| view.video_position(q)).collect();
            for &v in &vids {
                for &q in &batch.queries {
                    if let std::collections::hash_map::Entry::Vacant(e) = windows.entry((v, q)) {
                        let w = coarse_window(&model, &frozen, &proposals[&v], v, q, config.lambda)?;
                        debug!("coarse window for video {v}, query {q}: {w}");
                        e.insert(w);
                    }
                }
            }

            let mut g = Graph::new();
            let store = &model.store;
            let mut frames = Vec::with_capacity(batch.len());
            let mut sents = Vec::with_capacity(batch.len());
            for (&q, &v) in batch.queries.iter().zip(&vids) {
                let states = g.constant(frozen.videos[&v].0.clone());
                frames.push(model.fine.map_frames(&mut g, store, states)?);
                let hs = g.constant(frozen.sentences[&q].0.clone());
                sents.push(model.fine.map_sentence(&mut g, store, hs)?);
            }
            let mut scores: HashMap<(usize, usize), Var> = HashMap::new();
            let mut score = |g: &mut Graph, a: usize, b: usize| -> Result<Var> {
                if let Some(&s) = scores.get(&(a, b)) {
                    return Ok(s);
                }
                let w = windows[&(vids[a], batch.queries[b])];
                let per_frame = model.fine.score_window(g, store, frames[a], sents[b], w)?;
                let s = video_sentence_score(g, per_frame)?;
                scores.insert((a, b), s);
                Ok(s)
            };

            let mut terms = Vec::new();
            for i in 0..batch.len() {
                let pos = score(&mut g, i, i)?;
                for j in batch.negatives(i, view.queries).collect::<Vec<_>>() {
                    let neg_video = score(&mut g, j, i)?;
                    let neg_sentence = score(&mut g, i, j)?;
                    terms.push(hinge(&mut g, neg_video, pos, config.margin)?);
                    terms.push(hinge(&mut g, neg_sentence, pos, config.margin)?);
                }
            }
            if terms.is_empty() {
                continue;
            }
            let loss = sum_vars(&mut g, &terms)?;
            total += stepper.step(&mut model, g, loss)?;
        }
        let mean = total / batches.len().max(1) as f64;
        info!("fine epoch {}/{}: loss {mean:.5}", epoch + 1, config.fine_epochs);
        stepper.log.epoch_losses.push(mean);
    }

    model.store.unfreeze_all();
    let ckpt = Checkpoint {
        stage: Stage::Fine,
        epoch: config.fine_epochs as u32,
        config,
        params: model.store,
    };
    Ok((ckpt, stepper.log))
}

/// Expanded coarse window the frozen coarse stage picks for `(video, query)`.
fn coarse_window(model: &Model, frozen: &FrozenFeatures, proposals: &ProposalSet, video: usize, query: usize, lambda: f64) -> Result<Segment> {
    let mut g = Graph::new();
    let (states, mapped) = &frozen.videos[&video];
    let mapped = g.constant(mapped.clone());
    let sentence = g.constant(frozen.sentences[&query].1.clone());
    let streams = model
        .coarse
        .score(&mut g, &model.store, mapped, sentence, &proposals.segments())?;
    let best = select_best(&score_pairs(&g, streams.scores), proposals)?;
    Ok(expand(best, lambda, states.shape()[0])?.window)
}
