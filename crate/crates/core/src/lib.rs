//! Spiking-network engine built around stochastic domain-wall MTJ neurons.
//!
//! The crate is `no_std` (it needs `alloc`) and holds the numerical core:
//!
//! * [`tensor`] and [`graph`]: a small dense-tensor type and a reverse-mode
//!   tape with exactly the operations the network needs.
//! * [`device`]: switching-probability curves, pulse-cycling Monte Carlo,
//!   likelihood fitting, the multi-weight ramp model and the write-energy
//!   estimate.
//! * [`neuron`]: binary, multi-weight and LIF neuron updates together with
//!   their surrogate gradients.
//! * [`encoding`]: image sets, Gaussian corruption, Poisson rate coding and
//!   train/validation splitting.
//! * [`train`]: the spiking MLP, Adam, the training loop, evaluation and the
//!   noise sweep.
//!
//! File formats, the CLI, and anything touching the filesystem live in the
//! companion `dwsnn` crate.
#![no_std]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod device;
pub mod encoding;
pub mod error;
pub mod graph;
pub mod neuron;
pub mod real;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::Tensor;
