//! Minimal reverse-mode tensor engine: a linear tape of 2-D ops, named
//! parameter storage, Adam, and a central-difference gradient oracle.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases are what the rest of the workspace uses.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use error::{NeuralError, Result};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use params::{adam_step, clip_global_norm, global_norm, AdamConfig, Bound, ParamId, ParamStore};
pub use scalar::Scalar;
pub use tape::{Gradients, SparseRows, Tape, Var};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tape64 = Tape<f64>;
pub type ParamStore64 = ParamStore<f64>;
