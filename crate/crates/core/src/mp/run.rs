use std::time::Instant;

use super::{local_solve, scale_lss, scale_spm, scale_unis, CorrectionSet, Executor, ScalingResult, Strategy};
use crate::error::{Error, Result};
use crate::harness::{Cost, EvalCounters, IterationCost};
use crate::lbfgs::{lbfgs_iterate, LbfgsState, StepReport, WolfeParams};
use crate::objective::SplitObjective;

#[derive(Debug, Clone, PartialEq)]
pub struct MpConfig {
    pub strategy: Strategy,
    /// Local LBFGS iterations per outer iteration.
    pub eta: usize,
    pub beta0: f64,
    /// Secant memory size, global and local.
    pub memory: usize,
    pub k_max: usize,
    pub newton_iters: usize,
    pub wolfe: WolfeParams,
    pub threads: usize,
    /// Revert to `θ` when UniS scaling increases the loss.
    pub safeguard: bool,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl Default for MpConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Spm,
            eta: 5,
            beta0: 1.0,
            memory: 10,
            k_max: 100,
            newton_iters: 3,
            wolfe: WolfeParams::default(),
            threads: 1,
            safeguard: true,
            record_iterates: false,
        }
    }
}

impl MpConfig {
    /// The `Lbfgs` strategy skips the local phase entirely.
    pub fn is_plain(&self) -> bool {
        self.strategy == Strategy::Lbfgs
    }

    pub fn validate(&self) -> Result<()> {
        self.wolfe.validate()?;
        if self.memory == 0 {
            return Err(Error::InvalidConfig("memory size must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        if !self.beta0.is_finite() {
            return Err(Error::InvalidConfig("beta0 must be finite".into()));
        }
        Ok(())
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub l2: f64,
    /// Cumulative counters after this epoch.
    pub counters: EvalCounters,
    pub beta_min: f64,
    pub beta_max: f64,
    pub wall_seconds: f64,
    /// Measured cost of this epoch's iteration (absent for epoch 0).
    pub cost: Option<IterationCost>,
    /// Loss at `θ^{k+1/2}` when it was evaluated.
    pub loss_half: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub strategy: Strategy,
    pub records: Vec<EpochRecord>,
    pub iterates: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
    /// Secant pairs stored by the global and all local memories.
    pub pairs_stored: u64,
    /// Smallest `yᵀs` among those pairs.
    pub min_curvature: f64,
    /// Subdomain solves that failed and were zeroed.
    pub flagged_local: u64,
    pub aborted: Option<String>,
}

impl Trace {
    pub fn final_record(&self) -> &EpochRecord {
        self.records.last().expect("trace has an epoch-0 row")
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Epochs whose measured costs can be checked against the cost model.
    pub fn iteration_costs(&self) -> Vec<(usize, IterationCost)> {
        self.records
            .iter()
            .filter_map(|r| r.cost.map(|c| (r.epoch, c)))
            .collect()
    }
}

struct Recorder<'a> {
    trace: Trace,
    counters: EvalCounters,
    start: Instant,
    monitor: &'a mut dyn FnMut(&[f64]) -> Result<f64>,
    record_iterates: bool,
}

impl Recorder<'_> {
    fn push(&mut self, epoch: usize, st: &LbfgsState, beta: &[f64], cost: Option<IterationCost>, loss_half: Option<f64>) -> Result<()> {
        let l2 = (self.monitor)(&st.theta)?;
        let (beta_min, beta_max) = if beta.is_empty() {
            (0.0, 0.0)
        } else {
            beta.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| (lo.min(b), hi.max(b)))
        };
        self.trace.records.push(EpochRecord {
            epoch,
            loss: st.loss,
            l2,
            counters: self.counters,
            beta_min,
            beta_max,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            cost,
            loss_half,
        });
        if self.record_iterates {
            self.trace.iterates.push(st.theta.clone());
        }
        Ok(())
    }

    fn finish(mut self, st: &LbfgsState, aborted: Option<String>) -> Trace {
        let (stored, _) = st.memory.counts();
        self.trace.pairs_stored += stored;
        self.trace.min_curvature = self.trace.min_curvature.min(st.memory.min_curvature());
        self.trace.theta = st.theta.clone();
        self.trace.aborted = aborted;
        self.trace
    }
}

fn global_cost(rep: &StepReport) -> Cost {
    Cost::new(rep.loss_evals, rep.grad_evals)
}

/// Runs `k_max` outer iterations from `theta0`.
///
/// With the `Lbfgs` strategy this is plain LBFGS. Otherwise each iteration
/// runs the local solves on `cfg.threads` threads, combines
/// the corrections with the chosen strategy into `θ^{k+1/2}` and takes one
/// global LBFGS step from there with the persistent global memory.
/// `monitor` is called on every iterate and its value is stored as the
/// validation error.
///
/// A non-finite global loss ends the run early; the partial trace is
/// returned with `aborted` set.
pub fn mp_lbfgs_run<O: SplitObjective + ?Sized>(
    obj: &O,
    theta0: Vec<f64>,
    cfg: &MpConfig,
    monitor: &mut dyn FnMut(&[f64]) -> Result<f64>,
) -> Result<Trace> {
    cfg.validate()?;
    let exec = Executor::new(cfg.threads)?;
    let n_s = obj.layout().n_blocks();
    let mut rec = Recorder {
        trace: Trace {
            strategy: if cfg.is_plain() { Strategy::Lbfgs } else { cfg.strategy },
            records: Vec::with_capacity(cfg.k_max + 1),
            iterates: Vec::new(),
            theta: Vec::new(),
            pairs_stored: 0,
            min_curvature: f64::INFINITY,
            flagged_local: 0,
            aborted: None,
        },
        counters: EvalCounters::default(),
        start: Instant::now(),
        monitor,
        record_iterates: cfg.record_iterates,
    };
    let mut st = LbfgsState::new(obj, theta0, cfg.memory)?;
    rec.counters.charge(Cost::new(1, 1), Cost::new(1, 1));
    rec.push(0, &st, &[], None, None)?;

    for epoch in 1..=cfg.k_max {
        let step = if cfg.is_plain() {
            plain_step(obj, &mut st, cfg)
        } else {
            mp_step(obj, &mut st, cfg, &exec, n_s, &mut rec.trace)
        };
        match step {
            Ok((cost, beta, loss_half)) => {
                rec.counters.charge(cost.total, cost.parallel);
                rec.counters.linesearch_iters += cost.its_ls;
                rec.counters.newton_iters_used += cost.its_newton;
                rec.push(epoch, &st, &beta, Some(cost), loss_half)?;
            }
            Err(Error::Evaluation(msg)) => {
                return Ok(rec.finish(&st, Some(format!("epoch {epoch}: {msg}"))));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(rec.finish(&st, None))
}

fn plain_step<O: SplitObjective + ?Sized>(
    obj: &O,
    st: &mut LbfgsState,
    cfg: &MpConfig,
) -> Result<(IterationCost, Vec<f64>, Option<f64>)> {
    let rep = lbfgs_iterate(obj, st, &cfg.wolfe)?;
    let c = global_cost(&rep);
    Ok((
        IterationCost {
            parallel: c,
            total: c,
            its_ls: rep.its_ls as u64,
            failed: rep.failed,
            converged: rep.converged,
            ..IterationCost::default()
        },
        Vec::new(),
        None,
    ))
}

fn mp_step<O: SplitObjective + ?Sized>(
    obj: &O,
    st: &mut LbfgsState,
    cfg: &MpConfig,
    exec: &Executor,
    n_s: usize,
    trace: &mut Trace,
) -> Result<(IterationCost, Vec<f64>, Option<f64>)> {
    let mut cost = IterationCost::default();

    // local phase
    let idx: Vec<usize> = (0..n_s).collect();
    let theta = &st.theta;
    let outcomes = exec.map(&idx, |j| local_solve(obj, theta, j, cfg.eta, cfg.memory, &cfg.wolfe));
    let mut corrections = Vec::with_capacity(n_s);
    for out in outcomes {
        cost.total += out.cost;
        cost.local_max = cost.local_max.max(out.cost);
        trace.pairs_stored += out.pairs_stored;
        trace.min_curvature = trace.min_curvature.min(out.min_curvature);
        trace.flagged_local += out.flagged as u64;
        corrections.push(out.correction);
    }
    cost.parallel = cost.local_max;
    let corr = CorrectionSet::new(obj.layout().clone(), corrections);

    // Nothing to scale: θ^{k+1/2} = θ^k exactly, and the gradient there
    // is already known.
    if corr.active().is_empty() {
        let loss_half = st.loss;
        let rep = lbfgs_iterate(obj, st, &cfg.wolfe)?;
        let gc = global_cost(&rep);
        cost.total += gc;
        cost.parallel += gc;
        cost.its_ls = rep.its_ls as u64;
        cost.failed = rep.failed;
        cost.converged = rep.converged;
        return Ok((cost, vec![0.0; n_s], Some(loss_half)));
    }

    // scaling
    let scaled: ScalingResult = match cfg.strategy {
        Strategy::Unis => {
            let mut r = scale_unis(&st.theta, st.loss, &corr, cfg.beta0);
            if cfg.safeguard {
                cost.safeguard = true;
                r.total += Cost::new(1, 0);
                r.parallel += Cost::new(1, 0);
                let f = obj.loss(&r.theta_half);
                match f {
                    Ok(f) if f <= st.loss => r.loss_after = Some(f),
                    Ok(_) | Err(Error::Evaluation(_)) => {
                        r.theta_half = st.theta.clone();
                        r.beta.iter_mut().for_each(|b| *b = 0.0);
                        r.loss_after = Some(st.loss);
                    }
                    Err(e) => return Err(e),
                }
            }
            r
        }
        Strategy::Lss => scale_lss(obj, &st.theta, st.loss, &corr, &cfg.wolfe)?,
        Strategy::Spm => scale_spm(obj, &st.theta, st.loss, &corr, cfg.newton_iters, exec)?,
        Strategy::Lbfgs => unreachable!("plain strategy handled by plain_step"),
    };
    cost.total += scaled.total;
    cost.parallel += scaled.parallel;
    cost.its_newton = scaled.its_newton;
    cost.newton_trials = scaled.newton_trials;
    cost.active = scaled.active;
    cost.scaled = true;

    // global step from θ^{k+1/2}
    let mut g = vec![0.0; scaled.theta_half.len()];
    let loss_half = obj.loss_grad(&scaled.theta_half, &mut g)?;
    cost.total += Cost::new(0, 1);
    cost.parallel += Cost::new(0, 1);
    st.theta = scaled.theta_half;
    st.loss = loss_half;
    st.grad = g;
    let rep = lbfgs_iterate(obj, st, &cfg.wolfe)?;
    let gc = global_cost(&rep);
    cost.total += gc;
    cost.parallel += gc;
    cost.its_ls = rep.its_ls as u64;
    cost.failed = rep.failed;
    cost.converged = rep.converged;
    Ok((cost, scaled.beta, Some(loss_half)))
}
