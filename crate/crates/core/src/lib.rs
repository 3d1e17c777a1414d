//! Visibility through Poisson obstacle fields in the hyperbolic plane.
//!
//! The crate samples the Boolean model of random balls and the Poisson line
//! process in the Poincaré disc, computes what the origin can see through
//! them, and evaluates the closed-form probabilities those simulations are
//! compared against.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod circlearcs;
pub mod error;
pub mod experiments;
pub mod hypgeo;
pub mod sampler;
pub mod visibility;

pub use error::{Error, Result};
