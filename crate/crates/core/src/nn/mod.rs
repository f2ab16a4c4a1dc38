//! Fully connected leaky-ReLU regressor trained with hand-written backprop.

mod matrix;
mod model;
mod network;
mod optim;

pub use matrix::Matrix;
pub use model::{Surrogate, MODEL_FORMAT_VERSION, MODEL_MAGIC};
pub use network::{
    leaky_relu, leaky_relu_derivative, output_delta, quadratic_cost, quadratic_cost_batch,
    BatchWorkspace, ForwardTrace, Gradients, Layer, NetworkConfig, NetworkParameters,
    OutputActivation, GRADIENT_CHUNK,
};
pub use optim::{OptimizerMode, OptimizerState};
