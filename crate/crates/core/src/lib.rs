//! Matrix completion and image inpainting by kernel regression with exact
//! infinite-width neural tangent kernels.
//!
//! * [`fc`] completes tabular data with the NTK of a fully connected network
//!   over column embeddings ([`priors`] builds the embeddings).
//! * [`cntk`] computes the convolutional NTK of an encoder-decoder network on
//!   a prior image, and [`expand`] recovers high-resolution kernels from a
//!   small base kernel.
//! * [`solve`] holds the direct and preconditioned iterative solvers shared by
//!   both paths; [`pipeline`] ties everything to PNG and CSV files.

pub mod cntk;
pub mod csv_io;
pub mod dual;
pub mod error;
pub mod expand;
pub mod fc;
pub mod kernel_file;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod priors;
pub mod solve;

pub use error::{Error, Result};
