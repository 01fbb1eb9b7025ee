//! Bayesian meta-learning for collections of regression and classification
//! tasks whose coefficients concentrate near a shared low-dimensional subspace.
//!
//! The crate is organized bottom-up: [`manifold`] holds Stiefel/Grassmann
//! geometry, [`samplers`] the random variate generators and MCMC kernels,
//! [`model`] the hierarchical linear and logistic models, [`eval`] the
//! diagnostics, and [`cli`] the experiment runner behind the `metasub` binary.

pub mod cli;
pub mod error;
pub mod eval;
pub mod manifold;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod special;

pub use error::{Error, Result};

pub type Mat = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
