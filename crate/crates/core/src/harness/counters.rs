//! Evaluation counters and the per-iteration cost model.

use std::fmt;
use std::ops::{Add, AddAssign};

use crate::error::{Error, Result};
use crate::mp::Strategy;

/// Loss and gradient evaluation counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Cost {
    pub loss: u64,
    pub grad: u64,
}

impl Cost {
    pub const ZERO: Cost = Cost { loss: 0, grad: 0 };

    pub fn new(loss: u64, grad: u64) -> Self {
        Self { loss, grad }
    }

    /// Componentwise maximum.
    pub fn max(self, o: Cost) -> Cost {
        Cost::new(self.loss.max(o.loss), self.grad.max(o.grad))
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, o: Cost) -> Cost {
        Cost::new(self.loss + o.loss, self.grad + o.grad)
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, o: Cost) {
        *self = *self + o;
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} L, {} g)", self.loss, self.grad)
    }
}

/// Cumulative counters of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    pub loss_evals_total: u64,
    pub grad_evals_total: u64,
    pub loss_evals_parallel: u64,
    pub grad_evals_parallel: u64,
    pub linesearch_iters: u64,
    pub newton_iters_used: u64,
}

impl EvalCounters {
    pub fn charge(&mut self, total: Cost, parallel: Cost) {
        self.loss_evals_total += total.loss;
        self.grad_evals_total += total.grad;
        self.loss_evals_parallel += parallel.loss;
        self.grad_evals_parallel += parallel.grad;
    }
}

/// What one outer iteration measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationCost {
    /// Parallel counts of the iteration (global phase plus the slowest
    /// subdomain).
    pub parallel: Cost,
    pub total: Cost,
    /// Trials of the global line search.
    pub its_ls: u64,
    /// Largest local loss and gradient counts, taken separately.
    pub local_max: Cost,
    /// Accepted Newton steps (SPM).
    pub its_newton: u64,
    /// Damping trials over all Newton steps (SPM).
    pub newton_trials: u64,
    /// Active corrections (SPM, LSS).
    pub active: u64,
    /// Some correction was nonzero, so a scaling phase ran.
    pub scaled: bool,
    /// A loss evaluation was spent on the β = 0 safeguard.
    pub safeguard: bool,
    pub failed: bool,
    pub converged: bool,
}

/// Per-iteration parallel evaluation counts predicted by the cost model.
///
/// With `G` the global LBFGS step, `(1 + its_ls, 1)` normally, `(its_ls, 0)`
/// after a failed search and `(0, 0)` at a stationary point:
///
/// - LBFGS: `G`
/// - UniS: `G + (local_L + safeguard, 1 + local_g)`
/// - SPM: the UniS counts without safeguard, plus
///   `(2 + its_newton + trials, 2 + its_newton)` when any Hessian column
///   is active
///
/// When every correction is zero no scaling runs and `θ^{k+1/2} = θ^k`, so
/// only `G + local` remains.
///
/// LSS has no closed-form row and is rejected.
pub fn predict_cost(strategy: Strategy, m: &IterationCost) -> Result<Cost> {
    let global = if m.converged {
        Cost::ZERO
    } else if m.failed {
        Cost::new(m.its_ls, 0)
    } else {
        Cost::new(1 + m.its_ls, 1)
    };
    match strategy {
        Strategy::Lbfgs => Ok(global),
        Strategy::Unis | Strategy::Spm if !m.scaled => Ok(global + m.local_max),
        Strategy::Unis => Ok(global + m.local_max + Cost::new(m.safeguard as u64, 1)),
        Strategy::Spm => {
            let mut c = global + m.local_max + Cost::new(m.safeguard as u64, 1);
            if m.active > 0 {
                c += Cost::new(2 + m.its_newton + m.newton_trials, 2 + m.its_newton);
            }
            Ok(c)
        }
        Strategy::Lss => Err(Error::UnknownMethod("lss has no cost-model row".into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub epoch: usize,
    pub measured: Cost,
    pub predicted: Cost,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl CostReport {
    pub fn passed(&self) -> bool {
        self.checked > 0 && self.mismatches.is_empty()
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} iterations checked, {} mismatches", self.checked, self.mismatches.len())?;
        for m in &self.mismatches {
            write!(f, "\n  epoch {}: measured {} predicted {}", m.epoch, m.measured, m.predicted)?;
        }
        Ok(())
    }
}

/// Compares every iteration's measured parallel counts with
/// [`predict_cost`].
pub fn counters_check(strategy: Strategy, iterations: &[(usize, IterationCost)]) -> Result<CostReport> {
    let mut report = CostReport::default();
    for &(epoch, m) in iterations {
        let predicted = predict_cost(strategy, &m)?;
        report.checked += 1;
        if predicted != m.parallel {
            report.mismatches.push(Mismatch {
                epoch,
                measured: m.parallel,
                predicted,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_row() {
        let m = IterationCost {
            its_ls: 3,
            ..Default::default()
        };
        assert_eq!(predict_cost(Strategy::Lbfgs, &m).unwrap(), Cost::new(4, 1));
        let m = IterationCost {
            its_ls: 1,
            ..Default::default()
        };
        assert_eq!(predict_cost(Strategy::Lbfgs, &m).unwrap(), Cost::new(2, 1));
    }

    #[test]
    fn unis_row() {
        let m = IterationCost {
            its_ls: 3,
            local_max: Cost::new(6, 2),
            scaled: true,
            ..Default::default()
        };
        assert_eq!(predict_cost(Strategy::Unis, &m).unwrap(), Cost::new(10, 4));
    }

    #[test]
    fn zero_corrections_cost_the_global_step_only() {
        let m = IterationCost {
            its_ls: 3,
            ..Default::default()
        };
        let plain = predict_cost(Strategy::Lbfgs, &m).unwrap();
        assert_eq!(predict_cost(Strategy::Unis, &m).unwrap(), plain);
        assert_eq!(predict_cost(Strategy::Spm, &m).unwrap(), plain);
    }

    #[test]
    fn spm_without_newton_is_unis_plus_two() {
        let m = IterationCost {
            its_ls: 2,
            active: 3,
            scaled: true,
            ..Default::default()
        };
        let unis = predict_cost(Strategy::Unis, &m).unwrap();
        assert_eq!(predict_cost(Strategy::Spm, &m).unwrap(), unis + Cost::new(2, 2));
    }

    #[test]
    fn lss_has_no_row() {
        assert!(matches!(
            predict_cost(Strategy::Lss, &IterationCost::default()),
            Err(Error::UnknownMethod(_))
        ));
    }

    #[test]
    fn check_reports_mismatches() {
        let good = IterationCost {
            its_ls: 1,
            parallel: Cost::new(2, 1),
            ..Default::default()
        };
        let bad = IterationCost {
            parallel: Cost::new(3, 1),
            ..good
        };
        let r = counters_check(Strategy::Lbfgs, &[(1, good), (2, bad)]).unwrap();
        assert_eq!(r.checked, 2);
        assert_eq!(r.mismatches.len(), 1);
        assert_eq!(r.mismatches[0].epoch, 2);
        assert!(!r.passed());
    }
}
