//! Dense tensors with define-by-run reverse-mode differentiation.

pub mod gradcheck;
mod params;
mod tape;
mod value;

pub use params::{Param, ParamId, ParamStore};
pub use tape::{BinaryOp, Graph, Var};
pub use value::Tensor;
