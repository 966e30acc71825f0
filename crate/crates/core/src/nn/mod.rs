//! Numeric core: dense networks, an LSTM cell, losses, Adam, checkpoints.

mod adam;
pub mod checkpoint;
mod dense;
pub mod loss;
mod lstm;
mod scalar;
mod tensor;

pub use adam::{Adam, BETA1, BETA2, EPSILON};
pub use checkpoint::{inspect, Checkpoint};
pub use dense::{blend_parameters, DenseGradients, DenseNet, ForwardCache};
pub use loss::{mse_loss, sigmoid, softmax_cross_entropy, softmax_rows};
pub use lstm::{LstmCell, LstmGradients, LstmState, LstmTrace};
pub use scalar::Scalar;
#[allow(unused_imports)]
pub(crate) use scalar::dot;
pub use tensor::Tensor;
