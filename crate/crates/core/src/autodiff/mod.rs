//! Reverse-mode differentiation over dense `f64` tensors, plus Adam.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::finite_difference_check;
pub(crate) use tape::gemm;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
