//! Numerical laboratory for Krein systems and Dirac scattering.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod config;
pub mod counterexample;
pub mod dirac;
pub mod error;
pub mod integrator;
pub mod krein;
pub mod linalg;
pub mod outer;
pub mod phase;
pub mod potential;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Mat2, C64};
pub use potential::PotentialSpec;
