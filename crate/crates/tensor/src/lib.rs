//! Minimal reverse-mode automatic differentiation over dense `f32` arrays.
//!
//! Tensors are immutable and reference counted; each one remembers the
//! operation that produced it. Calling [`Tensor::backward`] on a scalar walks
//! the recorded graph and returns gradients for every leaf created with
//! [`Tensor::var`] (or held in a trainable [`ParamStore`]).
//!
//! The operation set is what a style-based convolutional generator, its
//! discriminators and a few small auxiliary networks need: broadcasting
//! arithmetic, reductions, dense and 2-D convolutional layers, nearest
//! upsampling, average pooling and instance normalization.

mod conv;
pub mod nn;
mod ops;
pub mod optim;
mod tensor;

pub use nn::{Conv2d, Linear, ParamStore};
pub use optim::Adam;
pub use tensor::{numel, Grads, Tensor};
