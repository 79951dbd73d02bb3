//! Space-time correlation kernels, path simulation and Monte Carlo validation
//! for three noncolliding diffusions: Dyson Brownian motion on the line, the
//! noncolliding squared Bessel process on the half line, and noncolliding
//! Brownian motion on a circle.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod configspace;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod linalg;
pub mod martingale;
pub mod quadrature;
pub mod sde;
pub mod specfun;
pub mod stats;
pub mod transition;

pub use error::{Error, Result};
