use nalgebra::{Cholesky, DMatrix, DVector};

use super::{CorrectionSet, Executor};
use crate::error::{Error, Result};
use crate::harness::Cost;
use crate::lbfgs::{wolfe_search, WolfeParams};
use crate::objective::{norm_inf, Objective, SplitObjective};

/// Outcome of a scaling strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub beta: Vec<f64>,
    pub theta_half: Vec<f64>,
    pub loss_before: f64,
    /// Loss at `theta_half`, when the strategy evaluated it.
    pub loss_after: Option<f64>,
    pub total: Cost,
    pub parallel: Cost,
    /// Line-search trials (LSS) summed over subdomains.
    pub ls_trials: u64,
    pub its_newton: u64,
    pub newton_trials: u64,
    pub active: u64,
}

impl ScalingResult {
    fn unchanged(theta: &[f64], loss: f64, n: usize) -> Self {
        Self {
            beta: vec![0.0; n],
            theta_half: theta.to_vec(),
            loss_before: loss,
            loss_after: Some(loss),
            total: Cost::ZERO,
            parallel: Cost::ZERO,
            ls_trials: 0,
            its_newton: 0,
            newton_trials: 0,
            active: 0,
        }
    }
}

/// `θ + β₀ Σ_j R_jᵀc_j`. No evaluations.
pub fn scale_unis(theta: &[f64], loss: f64, corr: &CorrectionSet, beta0: f64) -> ScalingResult {
    let beta: Vec<f64> = (0..corr.len())
        .map(|j| if corr.is_active(j) { beta0 } else { 0.0 })
        .collect();
    ScalingResult {
        theta_half: corr.apply(theta, &beta),
        loss_after: None,
        active: corr.active().len() as u64,
        beta,
        ..ScalingResult::unchanged(theta, loss, 0)
    }
}

/// Sequential strong Wolfe searches along each active `R_jᵀc_j` in index
/// order, each starting at `α = 1` from the partially updated point.
/// Corrections that are not descent directions there get `β_j = 0`, as do
/// failed searches.
pub fn scale_lss<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    loss: f64,
    corr: &CorrectionSet,
    wolfe: &WolfeParams,
) -> Result<ScalingResult> {
    let mut res = ScalingResult::unchanged(theta, loss, corr.len());
    let mut cur = theta.to_vec();
    let mut f = loss;
    for j in corr.active() {
        res.active += 1;
        let dir = corr.column(j);
        let (f0, s0) = obj.loss_slope(&cur, &dir)?;
        res.total += Cost::new(1, 0);
        if !(s0 < 0.0) {
            continue;
        }
        let mut trial = vec![0.0; cur.len()];
        let search = wolfe_search(
            |a| {
                for ((t, x), d) in trial.iter_mut().zip(&cur).zip(&dir) {
                    *t = x + a * d;
                }
                obj.loss_slope(&trial, &dir)
            },
            f0,
            s0,
            wolfe,
        );
        match search {
            Ok(ls) => {
                res.ls_trials += ls.evals as u64;
                res.total += Cost::new(ls.evals as u64, 0);
                for (x, d) in cur.iter_mut().zip(&dir) {
                    *x += ls.alpha * d;
                }
                res.beta[j] = ls.alpha;
                f = ls.phi;
            }
            Err(Error::LineSearch { iters, .. }) => {
                res.ls_trials += iters as u64;
                res.total += Cost::new(iters as u64, 0);
            }
            Err(e) => return Err(e),
        }
    }
    res.parallel = res.total;
    res.theta_half = cur;
    res.loss_after = Some(f);
    Ok(res)
}

/// Finite-difference subspace Hessian `H ≈ Cᵀ∇²L(θ)C`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianAction {
    /// `n_s × n_s`, symmetrized; unit diagonal on inactive rows/columns.
    pub h: DMatrix<f64>,
    /// Columns that were probed successfully.
    pub active: Vec<bool>,
    pub total: Cost,
    pub parallel: Cost,
}

/// Column `j` of `∇²L·C` by `(∇L(θ + ε_j R_jᵀc_j) − ∇L(θ))/ε_j` with
/// `ε_j = √u·(1 + ‖θ‖∞)/‖c_j‖∞`. A non-finite probe halves `ε_j` up to five
/// times before the column is dropped. Probes run on `exec`.
pub fn spm_hessian_action<O: SplitObjective + ?Sized>(
    obj: &O,
    theta: &[f64],
    corr: &CorrectionSet,
    exec: &Executor,
) -> HessianAction {
    let n = corr.len();
    let scale = f64::EPSILON.sqrt() * (1.0 + norm_inf(theta));
    let probe = |j: usize| -> (Option<Vec<f64>>, u64) {
        let mut eps = scale / corr.norm_inf(j);
        for attempt in 1..=6u64 {
            let step: Vec<f64> = corr.corrections[j].iter().map(|c| eps * c).collect();
            if let Ok(d) = obj.grad_delta(theta, j, &step) {
                if d.iter().all(|v| v.is_finite()) {
                    return (Some(d.into_iter().map(|v| v / eps).collect()), attempt);
                }
            }
            eps *= 0.5;
        }
        (None, 6)
    };
    let active_idx = corr.active();
    let columns = exec.map(&active_idx, probe);
    let mut total = Cost::ZERO;
    let mut parallel = Cost::ZERO;
    let mut cols: Vec<Option<Vec<f64>>> = vec![None; n];
    for (&j, (col, attempts)) in active_idx.iter().zip(columns) {
        total += Cost::new(attempts, attempts);
        parallel = parallel.max(Cost::new(attempts, attempts));
        cols[j] = col;
    }
    let active: Vec<bool> = cols.iter().map(Option::is_some).collect();
    let mut h = DMatrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        match col {
            Some(hj) => {
                for m in (0..n).filter(|&m| active[m]) {
                    h[(m, j)] = crate::objective::dot(&corr.corrections[m], &hj[corr.layout.range(m)]);
                }
            }
            None => h[(j, j)] = 1.0,
        }
    }
    let h = (&h + h.transpose()) * 0.5;
    HessianAction {
        h,
        active,
        total,
        parallel,
    }
}

/// Cholesky of `H + μI`, with `μ = 0` first and then doubling from 1e-10.
fn shifted_cholesky(h: &DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(h.clone()) {
        return Some(c);
    }
    let n = h.nrows();
    let mut mu = 1e-10;
    for _ in 0..400 {
        if let Some(c) = Cholesky::new(h + DMatrix::identity(n, n) * mu) {
            return Some(c);
        }
        mu *= 2.0;
    }
    None
}

/// Subspace minimization of `φ(β) = L(θ + Cβ)` from `β = 0` by simplified
/// Newton: the finite-difference Hessian is factored once and reused, each
/// step damped by Armijo backtracking (halving from 1, constant 1e-4, at
/// most 20 halvings). Stops after `newton_iters` steps, when
/// `‖∇φ‖∞ < 1e-10`, or when no damped step decreases `φ`.
pub fn scale_spm<O: SplitObjective + ?Sized>(
    obj: &O,
    theta: &[f64],
    loss: f64,
    corr: &CorrectionSet,
    newton_iters: usize,
    exec: &Executor,
) -> Result<ScalingResult> {
    let n = corr.len();
    let mut res = ScalingResult::unchanged(theta, loss, n);
    if corr.active().is_empty() {
        return Ok(res);
    }
    let mut g = vec![0.0; theta.len()];
    let mut phi = obj.loss_grad(theta, &mut g)?;
    res.loss_before = phi;
    res.total += Cost::new(1, 1);
    res.parallel += Cost::new(1, 1);

    let hess = spm_hessian_action(obj, theta, corr, exec);
    res.total += hess.total;
    res.parallel += hess.parallel;
    res.active = hess.active.iter().filter(|&&a| a).count() as u64;

    let mask = |v: Vec<f64>| -> DVector<f64> {
        DVector::from_iterator(n, v.into_iter().zip(&hess.active).map(|(x, &a)| if a { x } else { 0.0 }))
    };
    let mut beta = DVector::zeros(n);
    let Some(chol) = shifted_cholesky(&hess.h) else {
        res.loss_after = Some(phi);
        return Ok(res);
    };
    let mut gphi = mask(corr.project(&g));
    let mut cur = theta.to_vec();
    for _ in 0..newton_iters {
        if gphi.amax() < 1e-10 {
            break;
        }
        let d = -chol.solve(&gphi);
        let decrease = gphi.dot(&d);
        if !(decrease < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=20 {
            let trial_beta = &beta + &d * t;
            let trial = corr.apply(theta, trial_beta.as_slice());
            res.newton_trials += 1;
            res.total += Cost::new(1, 0);
            res.parallel += Cost::new(1, 0);
            match obj.loss(&trial) {
                Ok(f) if f <= phi + 1e-4 * t * decrease => {
                    accepted = Some((trial_beta, trial));
                    break;
                }
                Ok(_) | Err(Error::Evaluation(_)) => t *= 0.5,
                Err(e) => return Err(e),
            }
        }
        let Some((nb, point)) = accepted else {
            break;
        };
        phi = obj.loss_grad(&point, &mut g)?;
        res.its_newton += 1;
        res.total += Cost::new(1, 1);
        res.parallel += Cost::new(1, 1);
        beta = nb;
        cur = point;
        gphi = mask(corr.project(&g));
    }
    res.beta = beta.iter().copied().collect();
    res.theta_half = cur;
    res.loss_after = Some(phi);
    Ok(res)
}
