//! Reverse-mode differentiation over a small fixed set of primitives:
//! affine maps, neighbor gather-mean, concatenation, ReLU and the loss heads.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, DEFAULT_EPS, REL_ERROR_FLOOR};
pub use params::{ParamSet, PARAMSET_MAGIC};
pub use tape::{Adjacency, Gradients, ParamVars, Tape, Var};
pub use tensor::Tensor;

pub(crate) use tape::chamfer_parts;
