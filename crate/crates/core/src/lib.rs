//! Core library: correlation identities on convolution kernels, the
//! convolutional-similarity loss, optimizers, the Monte-Carlo experiment
//! harness, a from-scratch CNN engine, and dataset ingestion.

pub mod convsim;
pub mod data;
pub mod experiments;
pub mod nn;
pub mod numerics;
pub mod optim;
pub mod signal;
