//! Minimal differentiable-primitive layer: tensors, a reverse-mode tape,
//! parameterized layers (linear, attention, layer norm, GAT, FFN), gradient
//! checking, and an AdamW optimizer.
//!
//! Forward ops are pure; dropout takes an explicit train flag and rng, so
//! identical inputs and parameters produce bit-identical outputs.

pub mod autograd;
pub mod error;
pub mod gradcheck;
pub mod init;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use autograd::{Gradients, Tape, Var};
pub use error::{NnError, Result};
pub use gradcheck::gradcheck;
pub use params::{BoundParams, LayerParams, Param};
pub use tensor::{BoolMat, Tensor};
