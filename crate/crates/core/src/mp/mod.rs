//! Multi-preconditioned LBFGS: local subdomain solves, correction scaling
//! and one global LBFGS step per outer iteration.

mod exec;
mod local;
mod run;
mod scaling;

use std::fmt;
use std::str::FromStr;

pub use exec::Executor;
pub use local::{local_solve, LocalOutcome};
pub use run::{mp_lbfgs_run, EpochRecord, MpConfig, Trace};
pub use scaling::{scale_lss, scale_spm, scale_unis, spm_hessian_action, HessianAction, ScalingResult};

use crate::error::Error;
use crate::params::BlockLayout;

/// How subdomain corrections are combined before the global step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// No preconditioning: plain LBFGS.
    Lbfgs,
    /// Uniform scaling `β_j = β₀`.
    Unis,
    /// Sequential line search per subdomain.
    Lss,
    /// Subspace minimization by simplified Newton.
    Spm,
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "lbfgs" => Ok(Strategy::Lbfgs),
            "unis" => Ok(Strategy::Unis),
            "lss" => Ok(Strategy::Lss),
            "spm" => Ok(Strategy::Spm),
            _ => Err(Error::InvalidConfig(format!("unknown strategy '{s}'"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Lbfgs => "lbfgs",
            Strategy::Unis => "unis",
            Strategy::Lss => "lss",
            Strategy::Spm => "spm",
        })
    }
}

/// Block corrections `c_j`, the columns of `C = [R₁ᵀc₁ … R_nᵀc_n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionSet {
    pub layout: BlockLayout,
    pub corrections: Vec<Vec<f64>>,
}

impl CorrectionSet {
    pub fn new(layout: BlockLayout, corrections: Vec<Vec<f64>>) -> Self {
        assert_eq!(layout.n_blocks(), corrections.len());
        for (j, c) in corrections.iter().enumerate() {
            assert_eq!(c.len(), layout.block_len(j), "correction {j} has the wrong length");
        }
        Self { layout, corrections }
    }

    pub fn zeros(layout: BlockLayout) -> Self {
        let corrections = layout.sizes().into_iter().map(|n| vec![0.0; n]).collect();
        Self { layout, corrections }
    }

    pub fn len(&self) -> usize {
        self.corrections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corrections.is_empty()
    }

    pub fn norm_inf(&self, j: usize) -> f64 {
        crate::objective::norm_inf(&self.corrections[j])
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.corrections[j].iter().any(|&v| v != 0.0)
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.len()).filter(|&j| self.is_active(j)).collect()
    }

    /// `θ + Σ_j β_j R_jᵀc_j`
    pub fn apply(&self, theta: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        for (j, (c, &b)) in self.corrections.iter().zip(beta).enumerate() {
            if b != 0.0 {
                for (o, v) in out[self.layout.range(j)].iter_mut().zip(c) {
                    *o += b * v;
                }
            }
        }
        out
    }

    /// `Cᵀ g`
    pub fn project(&self, g: &[f64]) -> Vec<f64> {
        self.corrections
            .iter()
            .enumerate()
            .map(|(j, c)| crate::objective::dot(c, &g[self.layout.range(j)]))
            .collect()
    }

    /// Column `j` as a full-length vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.layout.len()];
        out[self.layout.range(j)].copy_from_slice(&self.corrections[j]);
        out
    }
}
