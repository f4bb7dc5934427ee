use super::{wolfe_search, SecantMemory, WolfeParams};
use crate::error::{Error, Result};
use crate::objective::{dot, Objective};

/// Iterate, loss, gradient and curvature memory of one LBFGS instance.
#[derive(Debug, Clone)]
pub struct LbfgsState {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub grad: Vec<f64>,
    pub memory: SecantMemory,
}

impl LbfgsState {
    /// Evaluates loss and gradient at `theta` (one loss and one gradient
    /// evaluation).
    pub fn new<O: Objective + ?Sized>(obj: &O, theta: Vec<f64>, capacity: usize) -> Result<Self> {
        let mut grad = vec![0.0; theta.len()];
        let loss = obj.loss_grad(&theta, &mut grad)?;
        Ok(Self {
            theta,
            loss,
            grad,
            memory: SecantMemory::new(capacity),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepReport {
    /// Accepted step length (0 when no step was taken).
    pub alpha: f64,
    /// Line-search trials.
    pub its_ls: usize,
    pub loss_evals: u64,
    pub grad_evals: u64,
    /// Line search failed: iterate kept, memory cleared.
    pub failed: bool,
    /// Gradient was exactly zero; nothing to do.
    pub converged: bool,
    pub pair_accepted: bool,
}

/// One LBFGS update `θ ← θ + α·(−H∇L)` with a strong Wolfe step.
///
/// Each trial of the line search costs one loss evaluation (the slope comes
/// from a forward-mode pass); the accepted point costs one loss and one
/// gradient evaluation. If the quasi-Newton direction is not a descent
/// direction the memory is cleared and steepest descent is used. With an
/// empty memory the first trial step is `min(α₀, 1/‖∇L‖₂)`.
pub fn lbfgs_iterate<O: Objective + ?Sized>(obj: &O, state: &mut LbfgsState, wolfe: &WolfeParams) -> Result<StepReport> {
    if state.grad.iter().all(|&g| g == 0.0) {
        return Ok(StepReport {
            converged: true,
            ..StepReport::default()
        });
    }
    let mut dir = state.memory.two_loop(&state.grad);
    let mut slope = dot(&state.grad, &dir);
    if !(slope < 0.0) {
        state.memory.clear();
        dir = state.grad.iter().map(|g| -g).collect();
        slope = -dot(&state.grad, &state.grad);
    }
    // Without curvature pairs the direction is −∇L, whose length carries
    // no scale information; start the search at unit step length instead.
    let mut wolfe = *wolfe;
    if state.memory.is_empty() {
        wolfe.alpha_init = wolfe.alpha_init.min(1.0 / dot(&dir, &dir).sqrt());
    }
    let theta = &state.theta;
    let mut trial = vec![0.0; theta.len()];
    let search = wolfe_search(
        |a| {
            for ((t, x), d) in trial.iter_mut().zip(theta).zip(&dir) {
                *t = x + a * d;
            }
            obj.loss_slope(&trial, &dir)
        },
        state.loss,
        slope,
        &wolfe,
    );
    let ls = match search {
        Ok(ls) => ls,
        Err(Error::LineSearch { iters, .. }) => {
            state.memory.clear();
            return Ok(StepReport {
                its_ls: iters,
                loss_evals: iters as u64,
                failed: true,
                ..StepReport::default()
            });
        }
        Err(e) => return Err(e),
    };
    let next: Vec<f64> = theta.iter().zip(&dir).map(|(x, d)| x + ls.alpha * d).collect();
    let mut grad = vec![0.0; next.len()];
    let loss = obj.loss_grad(&next, &mut grad)?;
    let s: Vec<f64> = next.iter().zip(theta).map(|(a, b)| a - b).collect();
    let y: Vec<f64> = grad.iter().zip(&state.grad).map(|(a, b)| a - b).collect();
    let pair_accepted = state.memory.push_pair(s, y);
    state.theta = next;
    state.loss = loss;
    state.grad = grad;
    Ok(StepReport {
        alpha: ls.alpha,
        its_ls: ls.evals,
        loss_evals: ls.evals as u64 + 1,
        grad_evals: 1,
        failed: false,
        converged: false,
        pair_accepted,
    })
}
