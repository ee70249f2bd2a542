//! Deep-limit analysis of neural-network Gaussian fields on the sphere.
//!
//! The crate models the infinite-width Gaussian field of a depth-`L`
//! network on S^d through its iterated covariance kernel, classifies the
//! kernel's fixed-point regime, computes spectral and chaotic
//! decompositions of nonlinear functionals, and verifies the predicted
//! Gaussian / critical / non-central limits by Monte Carlo.

pub mod error;
pub mod par;
pub mod quad;
pub mod rng;

pub mod kernel;

pub mod dynamics;
pub mod fieldsim;
pub mod functionals;
pub mod inference;
pub mod spectral;

pub use error::{NngfError, Result};
