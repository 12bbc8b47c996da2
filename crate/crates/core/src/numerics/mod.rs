//! Dense tensors, reverse-mode differentiation, Adam and gradient checking.

mod adam;
mod gradcheck;
pub mod kernels;
mod tape;
mod tensor;

pub use adam::{AdamSettings, AdamState};
pub use gradcheck::{grad_check, relative_error, FD_STEP, MAGNITUDE_FLOOR};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
