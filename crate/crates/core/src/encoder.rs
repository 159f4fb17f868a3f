//! Frame and sentence encoders: FC projection plus bidirectional LSTMs over
//! the frame sequence, and a word-embedding table plus bidirectional LSTMs
//! over the query tokens.

use crate::error::{Error, Result};
use crate::nn::{lookup, Init, Linear};
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Weights of one LSTM direction. Gates are packed in the order
/// input, forget, cell candidate, output along the `4H` axis.
#[derive(Clone, Copy, Debug)]
pub struct LstmCell {
    /// `4H × in`
    pub w_input: ParamId,
    /// `4H × H`
    pub w_hidden: ParamId,
    /// `4H`; the forget block starts at 1.0.
    pub bias: ParamId,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(store: &mut ParamStore, init: &mut Init, name: &str, input: usize, hidden: usize) -> Result<Self> {
        let w_input = store.add(format!("{name}.w_input"), init.weight(&[4 * hidden, input]))?;
        let w_hidden = store.add(format!("{name}.w_hidden"), init.weight(&[4 * hidden, hidden]))?;
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(1.0);
        let bias = store.add(format!("{name}.bias"), b)?;
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
            hidden,
        })
    }

    pub fn bind(store: &ParamStore, name: &str) -> Result<Self> {
        let w_input = lookup(store, &format!("{name}.w_input"))?;
        let w_hidden = lookup(store, &format!("{name}.w_hidden"))?;
        let bias = lookup(store, &format!("{name}.bias"))?;
        let hidden = store.value(w_hidden).shape()[1];
        Ok(LstmCell {
            w_input,
            w_hidden,
            bias,
            hidden,
        })
    }

    /// Runs the cell over `inputs` (`T × in`) in the given order of time
    /// steps, from zero initial states. Returns the hidden state for each
    /// visited step, indexed by time step.
    fn run(&self, g: &mut Graph, store: &ParamStore, inputs: Var, reverse: bool) -> Result<Vec<Var>> {
        let steps = g.shape(inputs)[0];
        let h = self.hidden;
        let w_in = g.param(store, self.w_input);
        let w_hid = g.param(store, self.w_hidden);
        let bias = g.param(store, self.bias);
        let projected = g.linear(inputs, w_in, Some(bias))?;

        let mut states = vec![None; steps];
        let mut carry: Option<(Var, Var)> = None;
        let order: Box<dyn Iterator<Item = usize>> = if reverse {
            Box::new((0..steps).rev())
        } else {
            Box::new(0..steps)
        };
        for t in order {
            let mut pre = g.slice(projected, 0, t, 1)?;
            if let Some((h_prev, _)) = carry {
                let rec = g.linear(h_prev, w_hid, None)?;
                pre = g.add(pre, rec)?;
            }
            let sig = g.sigmoid(pre);
            let input_gate = g.slice(sig, 1, 0, h)?;
            let forget_gate = g.slice(sig, 1, h, h)?;
            let output_gate = g.slice(sig, 1, 3 * h, h)?;
            let cand_pre = g.slice(pre, 1, 2 * h, h)?;
            let candidate = g.tanh(cand_pre);

            let mut cell = g.mul(input_gate, candidate)?;
            if let Some((_, c_prev)) = carry {
                let kept = g.mul(forget_gate, c_prev)?;
                cell = g.add(cell, kept)?;
            }
            let squashed = g.tanh(cell);
            let hidden = g.mul(output_gate, squashed)?;
            states[t] = Some(hidden);
            carry = Some((hidden, cell));
        }
        Ok(states.into_iter().map(|s| s.expect("every step visited")).collect())
    }
}

/// Per-step outputs of a bidirectional run.
pub struct BiLstmOutput {
    /// `T × 2H`: forward state ‖ backward state per step.
    pub states: Var,
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
}

/// Bidirectional LSTM over `inputs` (`T × in`) with separate weights per direction.
pub fn bilstm(g: &mut Graph, store: &ParamStore, inputs: Var, fwd: &LstmCell, bwd: &LstmCell) -> Result<BiLstmOutput> {
    match g.shape(inputs) {
        [_, _] => {}
        s => return Err(Error::Dimension(format!("bilstm expects a T × in matrix, got {s:?}"))),
    }
    let forward = fwd.run(g, store, inputs, false)?;
    let backward = bwd.run(g, store, inputs, true)?;
    let f = g.concat(&forward, 0)?;
    let b = g.concat(&backward, 0)?;
    let states = g.concat(&[f, b], 1)?;
    Ok(BiLstmOutput {
        states,
        forward,
        backward,
    })
}

pub struct EncodedVideo {
    /// `T × H` projected frame features.
    pub projected: Var,
    /// `T × 2H` Bi-LSTM states.
    pub states: Var,
}

pub struct EncodedSentence {
    /// `N × 2H` per-token states.
    pub states: Var,
    /// `1 × 2H`: final forward state ‖ final backward state.
    pub vector: Var,
}

#[derive(Clone, Copy, Debug)]
pub struct VideoEncoder {
    pub projection: Linear,
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl VideoEncoder {
    pub fn new(store: &mut ParamStore, init: &mut Init, feature_dim: usize, hidden: usize) -> Result<Self> {
        Ok(VideoEncoder {
            projection: Linear::new(store, init, "encoder.video.proj", feature_dim, hidden)?,
            forward: LstmCell::new(store, init, "encoder.video.fwd", hidden, hidden)?,
            backward: LstmCell::new(store, init, "encoder.video.bwd", hidden, hidden)?,
        })
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(VideoEncoder {
            projection: Linear::bind(store, "encoder.video.proj")?,
            forward: LstmCell::bind(store, "encoder.video.fwd")?,
            backward: LstmCell::bind(store, "encoder.video.bwd")?,
        })
    }

    /// Frame projection `x_t = W·c_t + b` over a `T × D` feature matrix.
    pub fn project_frames(&self, g: &mut Graph, store: &ParamStore, features: Var) -> Result<Var> {
        match g.shape(features) {
            [t, d] if *t >= 1 && *d == self.projection.input => {}
            s => {
                return Err(Error::Dimension(format!(
                    "frame features {s:?} do not match feature dim {}",
                    self.projection.input
                )))
            }
        }
        self.projection.forward(g, store, features)
    }

    pub fn encode(&self, g: &mut Graph, store: &ParamStore, features: Var) -> Result<EncodedVideo> {
        let projected = self.project_frames(g, store, features)?;
        let out = bilstm(g, store, projected, &self.forward, &self.backward)?;
        Ok(EncodedVideo {
            projected,
            states: out.states,
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TextEncoder {
    /// `vocab × E` word embeddings.
    pub embedding: ParamId,
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl TextEncoder {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Init,
        vocab_size: usize,
        embed_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        let table = init.uniform(&[vocab_size, embed_dim], 0.08);
        Ok(TextEncoder {
            embedding: store.add("encoder.text.embedding", table)?,
            forward: LstmCell::new(store, init, "encoder.text.fwd", embed_dim, hidden)?,
            backward: LstmCell::new(store, init, "encoder.text.bwd", embed_dim, hidden)?,
        })
    }

    pub fn bind(store: &ParamStore) -> Result<Self> {
        Ok(TextEncoder {
            embedding: lookup(store, "encoder.text.embedding")?,
            forward: LstmCell::bind(store, "encoder.text.fwd")?,
            backward: LstmCell::bind(store, "encoder.text.bwd")?,
        })
    }

    pub fn vocab_size(&self, store: &ParamStore) -> usize {
        store.value(self.embedding).shape()[0]
    }

    pub fn encode(&self, g: &mut Graph, store: &ParamStore, tokens: &[usize]) -> Result<EncodedSentence> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("sentence has no tokens".into()));
        }
        let vocab = self.vocab_size(store);
        if let Some(&bad) = tokens.iter().find(|&&t| t >= vocab) {
            return Err(Error::Input(format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let table = g.param(store, self.embedding);
        let words = g.gather_rows(table, tokens)?;
        let out = bilstm(g, store, words, &self.forward, &self.backward)?;
        let last_forward = *out.forward.last().expect("nonempty");
        let last_backward = out.backward[0];
        let vector = g.concat(&[last_forward, last_backward], 1)?;
        Ok(EncodedSentence {
            states: out.states,
            vector,
        })
    }
}
