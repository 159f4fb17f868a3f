//! Weakly-supervised temporal grounding of sentences in videos.
//!
//! A coarse stage scores multi-scale sliding-window proposals against a
//! sentence with a two-stream (classification × selection) grounder trained
//! by multiple instance learning. A fine stage expands the best proposal,
//! scores every frame in it with a ranking loss, and groups the frame scores
//! into the final segment with a threshold sweep.
//!
//! Everything runs on a small define-by-run autodiff engine in [`tensor`].

pub mod checkpoint;
pub mod coarse;
pub mod config;
pub mod dataset;
pub mod diagnostics;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fine;
pub mod grouping;
pub mod model;
pub mod nn;
pub mod optim;
pub mod pipeline;
pub mod predictions;
pub mod proposal;
pub mod tensor;
pub mod train;

pub use checkpoint::{Checkpoint, Stage};
pub use config::{Preset, TrainConfig};
pub use dataset::{Corpus, CorpusSpec};
pub use error::{Error, Result};
pub use eval::EvalReport;
pub use pipeline::{Grounder, Mode, Prediction};
pub use proposal::{Segment, WindowConfig};
pub use tensor::{Graph, Tensor, Var};
