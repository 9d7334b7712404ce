//! Numerical Gaussian process Kalman filtering.
//!
//! A linear PDE, discretized in time with an Euler scheme, induces a
//! multi-output GP prior between consecutive time slices. Conditioning
//! that prior on a spatial grid yields pseudo dynamic and measurement
//! matrices, after which estimation is an ordinary Kalman recursion.

pub mod advection;
pub mod config;
pub mod error;
pub mod filter;
pub mod gaussian;
pub mod kernels;
pub mod optim;
pub mod regression;
pub mod run;
pub mod trace;

pub use error::{Error, Result};
pub use filter::{FilterConfig, FilterState, MeasurementBatch};
pub use gaussian::GaussianVec;
pub use kernels::{DiffOperator, HyperParams, Kernel, Scheme};
