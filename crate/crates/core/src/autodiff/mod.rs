//! Exact derivatives for the physics losses.
//!
//! Parameter gradients come from a scalar reverse-mode [`Tape`]. Spatial
//! derivatives come from [`Jet2`], which carries the value together with
//! first and pure second derivatives along each input axis. Threading jets
//! whose components are tape variables through a network gives the parameter
//! gradient of a loss that itself contains spatial derivatives.

mod jet;
mod scalar;
mod tape;

pub use jet::{spatial_jet, Jet2, MAX_AXES};
pub use scalar::Scalar;
pub use tape::{grad, Op, Tape, Var};
