//! The full set of learnable layers and helpers to run them.

use crate::coarse::CoarseHead;
use crate::encoder::{TextEncoder, VideoEncoder};
use crate::error::Result;
use crate::fine::FineHead;
use crate::nn::Init;
use crate::tensor::{Graph, ParamStore, Tensor, Var};

/// Name prefixes of the parameters trained in the coarse stage.
pub const COARSE_PREFIXES: [&str; 2] = ["encoder.", "coarse."];

pub struct Model {
    pub store: ParamStore,
    pub video: VideoEncoder,
    pub text: TextEncoder,
    pub coarse: CoarseHead,
    pub fine: FineHead,
}

impl Model {
    pub fn new(feature_dim: usize, vocab_size: usize, embed_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        let mut store = ParamStore::new();
        let mut init = Init::new(seed, hidden);
        let video = VideoEncoder::new(&mut store, &mut init, feature_dim, hidden)?;
        let text = TextEncoder::new(&mut store, &mut init, vocab_size, embed_dim, hidden)?;
        let coarse = CoarseHead::new(&mut store, &mut init, hidden)?;
        let fine = FineHead::new(&mut store, &mut init, hidden)?;
        Ok(Model {
            store,
            video,
            text,
            coarse,
            fine,
        })
    }

    /// Rebuilds layer handles over a loaded parameter store.
    pub fn bind(store: ParamStore) -> Result<Self> {
        Ok(Model {
            video: VideoEncoder::bind(&store)?,
            text: TextEncoder::bind(&store)?,
            coarse: CoarseHead::bind(&store)?,
            fine: FineHead::bind(&store)?,
            store,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.video.projection.input
    }

    pub fn hidden(&self) -> usize {
        self.video.projection.output
    }

    pub fn vocab_size(&self) -> usize {
        self.text.vocab_size(&self.store)
    }

    /// `T × 2H` frame states on `g`.
    pub fn encode_video(&self, g: &mut Graph, features: &Tensor) -> Result<Var> {
        let x = g.constant(features.clone());
        Ok(self.video.encode(g, &self.store, x)?.states)
    }

    /// `1 × 2H` sentence vector on `g`.
    pub fn encode_sentence(&self, g: &mut Graph, tokens: &[usize]) -> Result<Var> {
        Ok(self.text.encode(g, &self.store, tokens)?.vector)
    }
}
