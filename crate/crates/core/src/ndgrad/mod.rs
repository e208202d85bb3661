//! Minimal tensors and reverse-mode differentiation: just the ops, layers
//! and optimizer needed for small MLP and CNN models.

mod adam;
pub mod io;
mod layers;
mod loss;
mod param;
mod tape;
mod tensor;

pub use adam::Adam;
pub use layers::{scaled_uniform, Cnn, CnnHead, Conv2d, ConvStage, Linear, Mlp};
pub use loss::{gaussian_nll, LN_2PI};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Tape, Var};
pub use tensor::Tensor;
