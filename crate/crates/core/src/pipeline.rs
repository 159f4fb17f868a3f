//! Inference: encode, propose, pick the best coarse proposal, expand it,
//! score its frames, and group them into the final segment.

use crate::checkpoint::{Checkpoint, Stage};
use crate::coarse::{score_pairs, CoarseResult};
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::fine::{expand, read_frame_scores, ExpandedWindow, FrameScores};
use crate::grouping::group;
use crate::model::Model;
use crate::proposal::{generate, ProposalSet, Segment, WindowConfig};
use crate::tensor::{Graph, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Stop after best-proposal selection.
    CoarseOnly,
    /// Coarse selection followed by fine scoring and grouping.
    Full,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub coarse: CoarseResult,
    pub expanded: Option<ExpandedWindow>,
    pub frame_scores: Option<FrameScores>,
    /// Final answer: the coarse proposal in coarse-only mode, the grouped
    /// segment otherwise.
    pub segment: Segment,
}

/// A trained model plus the settings it was trained with.
pub struct Grounder {
    pub model: Model,
    pub config: TrainConfig,
    pub windows: WindowConfig,
    pub stage: Stage,
}

impl Grounder {
    pub fn new(model: Model, config: TrainConfig, stage: Stage) -> Result<Self> {
        let avg = config
            .avg_train_length
            .ok_or_else(|| Error::Config("config lacks avg_train_length; train first".into()))?;
        let windows = config.window_config(avg);
        windows.validate()?;
        Ok(Grounder {
            model,
            config,
            windows,
            stage,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        Self::new(Model::bind(ckpt.params.clone())?, ckpt.config.clone(), ckpt.stage)
    }

    /// The richest mode the checkpoint supports.
    pub fn default_mode(&self) -> Mode {
        match self.stage {
            Stage::Coarse => Mode::CoarseOnly,
            Stage::Fine => Mode::Full,
        }
    }

    pub fn proposals(&self, frames: usize) -> Result<ProposalSet> {
        generate(frames, &self.windows)
    }

    pub fn ground(&self, features: &Tensor, tokens: &[usize], mode: Mode) -> Result<Prediction> {
        if mode == Mode::Full && self.stage == Stage::Coarse {
            return Err(Error::Checkpoint("full inference needs a fine-stage checkpoint".into()));
        }
        let model = &self.model;
        let store = &model.store;
        let frames = features.shape()[0];
        let proposals = self.proposals(frames)?;

        let mut g = Graph::new();
        let states = model.encode_video(&mut g, features)?;
        let sentence = model.encode_sentence(&mut g, tokens)?;
        let mapped = model.coarse.map_frames(&mut g, store, states)?;
        let sent_feat = model.coarse.sentence_feature(&mut g, store, sentence)?;
        let streams = model.coarse.score(&mut g, store, mapped, sent_feat, &proposals.segments())?;
        let coarse = CoarseResult::from_scores(score_pairs(&g, streams.scores), &proposals)?;

        if mode == Mode::CoarseOnly {
            let segment = coarse.best;
            return Ok(Prediction {
                coarse,
                expanded: None,
                frame_scores: None,
                segment,
            });
        }

        let expanded = expand(coarse.best, self.config.lambda, frames)?;
        let scores = model.fine.frame_scores(&mut g, store, states, sentence, &expanded)?;
        let frame_scores = read_frame_scores(&g, scores, expanded.window);
        let segment = group(&frame_scores, &self.config.thresholds, coarse.best)?;
        Ok(Prediction {
            coarse,
            expanded: Some(expanded),
            frame_scores: Some(frame_scores),
            segment,
        })
    }
}
