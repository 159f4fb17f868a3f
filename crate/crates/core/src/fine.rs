//! Fine stage: boundary expansion around the coarse result, per-frame
//! matching scores, and the ranking loss over in-batch negatives.

use crate::coarse::fuse;
use crate::error::{Error, Result};
use crate::nn::{Init, Linear};
use crate::proposal::Segment;
use crate::tensor::{Graph, ParamStore, Var};

/// Coarse segment grown by `round(λ · len)` frames on each side, clamped to the video.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpandedWindow {
    pub window: Segment,
    pub source: Segment,
    pub lambda: f64,
}

pub fn expand(source: Segment, lambda: f64, frames: usize) -> Result<ExpandedWindow> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("expansion rate must be non-negative, got {lambda}")));
    }
    if frames == 0 || !source.fits(frames) {
        return Err(Error::Input(format!("segment {source} outside video of {frames} frames")));
    }
    let grow = (lambda * source.len() as f64).round() as usize;
    let window = Segment {
        start: source.start.saturating_sub(grow),
        end: (source.end + grow).min(frames - 1),
    };
    Ok(ExpandedWindow {
        window,
        source,
        lambda,
    })
}

/// Raw per-frame scores over an expanded window.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameScores {
    pub window: Segment,
    pub values: Vec<f64>,
}

impl FrameScores {
    /// Video-sentence score: the largest frame score.
    pub fn video_sentence_score(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FineHead {
    pub frame_fc: Linear,
    pub sentence_fc: Linear,
    pub fc1: Linear,
    pub scorer: Linear,
}

impl FineHead {
    pub fn new(store: &mut ParamStore, init: &mut Init, hidden: usize) -> Result<Self> {
        let h2 = 2 * hidden;
        Ok(FineHead {
            frame_fc: Linear::new(store, init, "fine.frame_fc", h2, hidden)?,
            sentence_fc: Linear::new(store, init, "fine.sentence_fc", h2, hidden)?,
            fc1: Linear::new(store, init, "fine.fc1", h2, hidden)?,
            scorer: Linear::new(store, init, "fine.fc4", 3 * hidden, 1)?,
        })
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(FineHead {
            frame_fc: Linear::bind(store, "fine.frame_fc")?,
            sentence_fc: Linear::bind(store, "fine.sentence_fc")?,
            fc1: Linear::bind(store, "fine.fc1")?,
            scorer: Linear::bind(store, "fine.fc4")?,
        })
    }

    /// `T × H` frame features `f'_t` for a whole video.
    pub fn map_frames(&self, g: &mut Graph, store: &ParamStore, states: Var) -> Result<Var> {
        self.frame_fc.forward(g, store, states)
    }

    /// `1 × H` sentence feature `f'^s`.
    pub fn map_sentence(&self, g: &mut Graph, store: &ParamStore, sentence: Var) -> Result<Var> {
        self.sentence_fc.forward(g, store, sentence)
    }

    /// `W × 1` scores `m'_t` for the frames of `window`, from pre-mapped features.
    pub fn score_window(&self, g: &mut Graph, store: &ParamStore, mapped_frames: Var, mapped_sentence: Var, window: Segment) -> Result<Var> {
        let frames = g.shape(mapped_frames)[0];
        if !window.fits(frames) {
            return Err(Error::Input(format!("window {window} outside video of {frames} frames")));
        }
        let video = g.slice(mapped_frames, 0, window.start, window.len())?;
        let sentence = g.repeat_rows(mapped_sentence, window.len())?;
        let fused = fuse(g, store, &self.fc1, video, sentence)?;
        self.scorer.forward(g, store, fused)
    }

    /// Scores every frame of the window against the sentence from encoder outputs.
    pub fn frame_scores(&self, g: &mut Graph, store: &ParamStore, states: Var, sentence: Var, window: &ExpandedWindow) -> Result<Var> {
        let frames = self.map_frames(g, store, states)?;
        let sent = self.map_sentence(g, store, sentence)?;
        self.score_window(g, store, frames, sent, window.window)
    }
}

pub fn read_frame_scores(g: &Graph, scores: Var, window: Segment) -> FrameScores {
    FrameScores {
        window,
        values: g.value(scores).data().to_vec(),
    }
}

/// `m'(V, S) = max_t m'_t` on the tape.
pub fn video_sentence_score(g: &mut Graph, scores: Var) -> Result<Var> {
    let best = g.max_axis(scores, 0)?;
    g.reshape(best, &[1])
}

/// `max(neg_video - pos + Δ, 0) + max(neg_sentence - pos + Δ, 0)`
pub fn fine_loss_value(pos: f64, neg_sentence: f64, neg_video: f64, margin: f64) -> f64 {
    (neg_video - pos + margin).max(0.0) + (neg_sentence - pos + margin).max(0.0)
}

/// Tape version of [`fine_loss_value`] for scalar `[1]` scores.
pub fn fine_loss(g: &mut Graph, pos: Var, neg_sentence: Var, neg_video: Var, margin: f64) -> Result<Var> {
    let a = hinge(g, neg_video, pos, margin)?;
    let b = hinge(g, neg_sentence, pos, margin)?;
    g.add(a, b)
}

/// `max(neg - pos + Δ, 0)`
pub fn hinge(g: &mut Graph, neg: Var, pos: Var, margin: f64) -> Result<Var> {
    let diff = g.sub(neg, pos)?;
    let shifted = g.add_scalar(diff, margin);
    Ok(g.relu(shifted))
}
