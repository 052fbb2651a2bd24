//! Minimal neural-network engine: dense and valid-padding conv layers,
//! element-wise activations, Glorot init, MSE, Adam and exact backprop.

pub mod adam;
pub mod checkpoint;
pub mod init;
pub mod layer;
pub mod loss;
mod network;
pub mod trunk;

pub use adam::AdamState;
pub use init::{glorot_uniform, glorot_uniform_n};
pub use layer::{conv_out_side, Activation, Layer, LayerGrad, LayerSpec};
pub use loss::mse_loss;
pub use network::{closed_form_param_count, Gradients, Network};
pub use trunk::SharedTrunk;
