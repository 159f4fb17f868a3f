//! Coarse stage: gated cross-modal interaction over sliding-window proposals,
//! the two-stream (classification × selection) grounder, its MIL loss and
//! best-proposal selection.

use crate::error::{Error, Result};
use crate::nn::{Init, Linear};
use crate::proposal::{ProposalSet, Segment};
use crate::tensor::{Graph, ParamStore, Var};

/// Log clamp for the coarse loss.
pub const LOSS_EPS: f64 = 1e-8;

/// Score of one proposal: `[mismatch, match]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScorePair(pub [f64; 2]);

impl ScorePair {
    pub fn negative(&self) -> f64 {
        self.0[0]
    }

    pub fn positive(&self) -> f64 {
        self.0[1]
    }
}

/// Bag label for the coarse loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairLabel {
    /// The sentence describes part of the video: `y = [0, 1]`.
    Aligned,
    /// `y = [1, 0]`.
    Misaligned,
}

impl PairLabel {
    pub fn class(self) -> usize {
        match self {
            PairLabel::Aligned => 1,
            PairLabel::Misaligned => 0,
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            PairLabel::Aligned => [0.0, 1.0],
            PairLabel::Misaligned => [1.0, 0.0],
        }
    }
}

/// Sigmoid gates computed from `f_v ‖ f_s`, one per modality.
#[derive(Clone, Copy, Debug)]
pub struct GateParams {
    pub video: Linear,
    pub sentence: Linear,
}

/// Gated features of every proposal: `K × H` each.
pub fn gate_pair(g: &mut Graph, store: &ParamStore, gates: &GateParams, video: Var, sentence: Var) -> Result<(Var, Var)> {
    if g.shape(video) != g.shape(sentence) {
        return Err(Error::Dimension(format!(
            "gate inputs differ: {:?} vs {:?}",
            g.shape(video),
            g.shape(sentence)
        )));
    }
    let joint = g.concat(&[video, sentence], 1)?;
    let gv = gates.video.forward(g, store, joint)?;
    let gv = g.sigmoid(gv);
    let gs = gates.sentence.forward(g, store, joint)?;
    let gs = g.sigmoid(gs);
    Ok((g.mul(video, gv)?, g.mul(sentence, gs)?))
}

/// Row-wise interaction `(v + s) ‖ (v ⊙ s) ‖ FC1(v ‖ s)`, giving `K × 3H`.
pub fn fuse(g: &mut Graph, store: &ParamStore, fc1: &Linear, video: Var, sentence: Var) -> Result<Var> {
    if g.shape(video) != g.shape(sentence) {
        return Err(Error::Dimension(format!(
            "fuse inputs differ: {:?} vs {:?}",
            g.shape(video),
            g.shape(sentence)
        )));
    }
    let sum = g.add(video, sentence)?;
    let product = g.mul(video, sentence)?;
    let joint = g.concat(&[video, sentence], 1)?;
    let mapped = fc1.forward(g, store, joint)?;
    g.concat(&[sum, product, mapped], 1)
}

/// Tape handles for the two grounder streams, each `K × 2`.
pub struct StreamScores {
    /// Softmax over the class axis: rows sum to 1.
    pub classification: Var,
    /// Softmax over the proposal axis: columns sum to 1.
    pub selection: Var,
    /// Elementwise product.
    pub scores: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct CoarseHead {
    pub frame_fc: Linear,
    pub sentence_fc: Linear,
    pub gates: GateParams,
    pub fc1: Linear,
    pub classification: Linear,
    pub selection: Linear,
}

impl CoarseHead {
    pub fn new(store: &mut ParamStore, init: &mut Init, hidden: usize) -> Result<Self> {
        let h2 = 2 * hidden;
        Ok(CoarseHead {
            frame_fc: Linear::new(store, init, "coarse.frame_fc", h2, hidden)?,
            sentence_fc: Linear::new(store, init, "coarse.sentence_fc", h2, hidden)?,
            gates: GateParams {
                video: Linear::new(store, init, "coarse.gate_video", h2, hidden)?,
                sentence: Linear::new(store, init, "coarse.gate_sentence", h2, hidden)?,
            },
            fc1: Linear::new(store, init, "coarse.fc1", h2, hidden)?,
            classification: Linear::new(store, init, "coarse.fc2", 3 * hidden, 2)?,
            selection: Linear::new(store, init, "coarse.fc3", 3 * hidden, 2)?,
        })
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(CoarseHead {
            frame_fc: Linear::bind(store, "coarse.frame_fc")?,
            sentence_fc: Linear::bind(store, "coarse.sentence_fc")?,
            gates: GateParams {
                video: Linear::bind(store, "coarse.gate_video")?,
                sentence: Linear::bind(store, "coarse.gate_sentence")?,
            },
            fc1: Linear::bind(store, "coarse.fc1")?,
            classification: Linear::bind(store, "coarse.fc2")?,
            selection: Linear::bind(store, "coarse.fc3")?,
        })
    }

    /// Maps every frame state through the frame FC; the result is shared by
    /// all proposals of the video.
    pub fn map_frames(&self, g: &mut Graph, store: &ParamStore, states: Var) -> Result<Var> {
        self.frame_fc.forward(g, store, states)
    }

    /// Max-pools mapped frames over the inclusive segment (`1 × H`).
    pub fn pool(&self, g: &mut Graph, mapped: Var, segment: Segment) -> Result<Var> {
        let frames = g.shape(mapped)[0];
        if !segment.fits(frames) {
            return Err(Error::Input(format!("segment {segment} outside video of {frames} frames")));
        }
        let rows = g.slice(mapped, 0, segment.start, segment.len())?;
        g.max_axis(rows, 0)
    }

    /// Feature of a single proposal.
    pub fn proposal_feature(&self, g: &mut Graph, store: &ParamStore, states: Var, segment: Segment) -> Result<Var> {
        let mapped = self.map_frames(g, store, states)?;
        self.pool(g, mapped, segment)
    }

    /// `K × H` features for all proposals.
    pub fn proposal_features(&self, g: &mut Graph, mapped: Var, proposals: &[Segment]) -> Result<Var> {
        if proposals.is_empty() {
            return Err(Error::EmptyInput("no proposals".into()));
        }
        let pooled = proposals
            .iter()
            .map(|&s| self.pool(g, mapped, s))
            .collect::<Result<Vec<_>>>()?;
        g.concat(&pooled, 0)
    }

    /// Sentence feature `f^s` (`1 × H`) from the sentence vector `h^s`.
    pub fn sentence_feature(&self, g: &mut Graph, store: &ParamStore, sentence: Var) -> Result<Var> {
        self.sentence_fc.forward(g, store, sentence)
    }

    pub fn two_stream_scores(&self, g: &mut Graph, store: &ParamStore, fused: Var) -> Result<StreamScores> {
        if g.shape(fused)[0] == 0 {
            return Err(Error::EmptyInput("no fused proposal features".into()));
        }
        let cls_logits = self.classification.forward(g, store, fused)?;
        let classification = g.softmax(cls_logits, 1)?;
        let slc_logits = self.selection.forward(g, store, fused)?;
        let selection = g.softmax(slc_logits, 0)?;
        let scores = g.mul(classification, selection)?;
        Ok(StreamScores {
            classification,
            selection,
            scores,
        })
    }

    /// Full coarse scoring of `proposals` against one sentence.
    ///
    /// `mapped` comes from [`CoarseHead::map_frames`] and `sentence` is the
    /// `1 × H` output of [`CoarseHead::sentence_feature`].
    pub fn score(&self, g: &mut Graph, store: &ParamStore, mapped: Var, sentence: Var, proposals: &[Segment]) -> Result<StreamScores> {
        let video = self.proposal_features(g, mapped, proposals)?;
        let sentence = g.repeat_rows(sentence, proposals.len())?;
        let (gated_v, gated_s) = gate_pair(g, store, &self.gates, video, sentence)?;
        let fused = fuse(g, store, &self.fc1, gated_v, gated_s)?;
        self.two_stream_scores(g, store, fused)
    }
}

/// Reads a `K × 2` score matrix off the tape.
pub fn score_pairs(g: &Graph, scores: Var) -> Vec<ScorePair> {
    g.value(scores)
        .data()
        .chunks(2)
        .map(|c| ScorePair([c[0], c[1]]))
        .collect()
}

/// Index of the largest positive score; the lowest index wins ties.
pub fn argmax_positive(scores: &[ScorePair]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s.positive() > scores[b].positive()) {
            best = Some(i);
        }
    }
    best
}

/// Video-level pair `(m_sum, m_max)`.
pub fn bag_scores(scores: &[ScorePair]) -> Option<([f64; 2], [f64; 2])> {
    let best = argmax_positive(scores)?;
    let mut sum = [0.0; 2];
    for s in scores {
        sum[0] += s.0[0];
        sum[1] += s.0[1];
    }
    Some((sum, scores[best].0))
}

/// MIL cross entropy over the summed and the best proposal scores:
/// `-Σ_j y_j · (log(m_sum_j + ε) + log(m_max_j + ε))`.
pub fn coarse_loss(g: &mut Graph, scores: Var, label: PairLabel) -> Result<Var> {
    let k = match g.shape(scores) {
        [k, 2] => *k,
        s => return Err(Error::Dimension(format!("coarse scores must be K × 2, got {s:?}"))),
    };
    let pairs = score_pairs(g, scores);
    let best = argmax_positive(&pairs).ok_or_else(|| Error::EmptyInput("no proposals".into()))?;
    debug_assert!(best < k);
    let class = label.class();

    let column = g.slice(scores, 1, class, 1)?;
    let sum = g.sum(column);
    let sum = g.add_scalar(sum, LOSS_EPS);
    let log_sum = g.log(sum)?;
    let top = g.slice(column, 0, best, 1)?;
    let top = g.reshape(top, &[1])?;
    let top = g.add_scalar(top, LOSS_EPS);
    let log_top = g.log(top)?;
    let total = g.add(log_sum, log_top)?;
    Ok(g.scale(total, -1.0))
}

/// Proposal with the highest positive score; ties go to the earlier start,
/// then to the shorter segment.
pub fn select_best(scores: &[ScorePair], proposals: &ProposalSet) -> Result<Segment> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no proposal scores".into()));
    }
    if scores.len() != proposals.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} proposals",
            scores.len(),
            proposals.len()
        )));
    }
    let segments = proposals.segments();
    let mut best = 0;
    for i in 1..scores.len() {
        let (a, b) = (scores[i].positive(), scores[best].positive());
        let tie_better = (segments[i].start, segments[i].len()) < (segments[best].start, segments[best].len());
        if a > b || (a == b && tie_better) {
            best = i;
        }
    }
    Ok(segments[best])
}

/// Outcome of coarse inference for one (video, sentence) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct CoarseResult {
    pub best: Segment,
    pub scores: Vec<ScorePair>,
    pub m_sum: [f64; 2],
    pub m_max: [f64; 2],
}

impl CoarseResult {
    pub fn from_scores(scores: Vec<ScorePair>, proposals: &ProposalSet) -> Result<Self> {
        let best = select_best(&scores, proposals)?;
        let (m_sum, m_max) = bag_scores(&scores).expect("nonempty scores");
        Ok(CoarseResult {
            best,
            scores,
            m_sum,
            m_max,
        })
    }
}
