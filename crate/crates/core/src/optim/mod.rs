//! Adam over the flat parameter vector and the task losses.

mod adam;
mod loss;

pub use adam::AdamState;
pub use loss::{compute_loss, loss_and_grad, LossKind, LossSpec, Output, Target};
