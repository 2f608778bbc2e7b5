//! Small differentiable-network substrate: dense, convolutional and
//! transposed-convolutional layers with hand-written backward passes,
//! losses, optimizers and a minibatch trainer.

mod checkpoint;
mod layers;
pub mod loss;
mod matrix;
mod network;
mod optim;
mod real;
mod train;

pub use checkpoint::{decode_params, encode_params, load_network, save_network};
pub use layers::{Activation, ConvGeometry, Layer};
pub use matrix::Matrix;
pub use network::{Network, NetworkKind, NetworkSpec, Shape3, Tape};
pub use optim::{Optimizer, OptimizerKind};
pub use real::Real;
pub(crate) use train::check_finite;
pub use train::{argmax, argmax_rows, train_supervised, BatchSchedule, LossKind, Targets, TrainConfig, TrainReport};
