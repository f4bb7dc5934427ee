//! Finite-basis physics-informed neural networks trained with a
//! multi-preconditioned L-BFGS optimizer.
//!
//! The crate is organized bottom-up:
//!
//! - [`autodiff`]: scalar reverse-mode tape and second-order spatial jets.
//! - [`geometry`]: overlapping box decompositions, window functions and
//!   Hammersley collocation points.
//! - [`model`]: residual subnetworks, the windowed FBPINN sum, hard boundary
//!   lifting, and a batched evaluator used for training.
//! - [`problems`]: Poisson and Burgers benchmarks, physics losses and the
//!   Burgers reference solution.
//! - [`lbfgs`]: secant memory, two-loop recursion and strong Wolfe search.
//! - [`mp`]: the multi-preconditioned outer loop with UniS, LSS and SPM
//!   correction scaling.
//! - [`harness`]: configuration files, evaluation counters, traces,
//!   checkpoints and the gradient / cost checks.

pub mod autodiff;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lbfgs;
pub mod model;
pub mod mp;
pub mod objective;
pub mod params;
pub mod problems;

pub use error::{Error, Result};
pub use geometry::{CollocationSet, Decomposition, Domain};
pub use harness::{EvalCounters, ExperimentConfig, Strategy};
pub use lbfgs::{SecantMemory, WolfeParams};
pub use model::{FbpinnModel, SubnetConfig};
pub use objective::{Objective, SplitObjective};
pub use params::{BlockLayout, ParamVector};
pub use problems::Problem;
