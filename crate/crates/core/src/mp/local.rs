use crate::harness::Cost;
use crate::lbfgs::{lbfgs_iterate, LbfgsState, WolfeParams};
use crate::objective::SplitObjective;

/// Result of one subdomain's local LBFGS run.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    /// `c_j = θ_j^{k+1/2} − R_jθ`; zero when skipped or failed.
    pub correction: Vec<f64>,
    pub cost: Cost,
    /// Local evaluation failed; the correction was zeroed.
    pub flagged: bool,
    pub pairs_stored: u64,
    pub min_curvature: f64,
    pub loss_before: Option<f64>,
    pub loss_after: Option<f64>,
}

/// `eta` LBFGS steps on the local objective of block `j`, starting at
/// `R_jθ` with a fresh memory of `capacity` pairs.
pub fn local_solve<O: SplitObjective + ?Sized>(
    obj: &O,
    theta: &[f64],
    j: usize,
    eta: usize,
    capacity: usize,
    wolfe: &WolfeParams,
) -> LocalOutcome {
    let start = &theta[obj.layout().range(j)];
    let mut out = LocalOutcome {
        correction: vec![0.0; start.len()],
        cost: Cost::ZERO,
        flagged: false,
        pairs_stored: 0,
        min_curvature: f64::INFINITY,
        loss_before: None,
        loss_after: None,
    };
    if eta == 0 {
        return out;
    }
    let Some(local) = obj.local(j, theta) else {
        return out;
    };
    let mut st = match LbfgsState::new(&*local, start.to_vec(), capacity) {
        Ok(st) => st,
        Err(_) => {
            out.cost = Cost::new(1, 1);
            out.flagged = true;
            return out;
        }
    };
    out.cost = Cost::new(1, 1);
    out.loss_before = Some(st.loss);
    for _ in 0..eta {
        match lbfgs_iterate(&*local, &mut st, wolfe) {
            Ok(rep) => {
                out.cost += Cost::new(rep.loss_evals, rep.grad_evals);
                if rep.converged {
                    break;
                }
            }
            Err(_) => {
                out.flagged = true;
                break;
            }
        }
    }
    (out.pairs_stored, _) = st.memory.counts();
    out.min_curvature = st.memory.min_curvature();
    if !out.flagged {
        for ((c, a), b) in out.correction.iter_mut().zip(&st.theta).zip(start) {
            *c = a - b;
        }
        out.loss_after = Some(st.loss);
    }
    out
}
