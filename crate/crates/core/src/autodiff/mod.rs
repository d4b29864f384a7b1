//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] records one forward computation. Parameters live in a
//! [`ParamStore`] outside the tape; they enter a computation through
//! [`Tape::param`] and receive gradients through
//! [`Gradients::accumulate_into`]. Accumulation is additive until
//! [`ParamStore::zero_grad`] is called.

mod gradcheck;
pub(crate) mod kernels;
mod tape;
mod tensor;

pub use gradcheck::{check_gradients, relative_error, GradCheckReport, ParamCheck, WorstEntry};
pub use kernels::log_softmax;
pub use tape::{Gradients, Tape, Var};
pub use tensor::{ParamId, ParamStore, Parameter, Tensor};
