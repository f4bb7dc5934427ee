use std::fs::File;
use std::io::{BufWriter, Write};

use super::ExperimentConfig;
use crate::error::Result;
use crate::geometry::{assign, build_decomposition, hammersley, CollocationSet, Decomposition};
use crate::model::{save_checkpoint, FbpinnModel, SubnetConfig};
use crate::mp::{mp_lbfgs_run, MpConfig, Trace};
use crate::objective::PinnObjective;
use crate::problems::{problem_by_name, relative_l2, validation_set, Assembly, Problem};

pub const CSV_HEADER: &str = "epoch,loss,l2_val,loss_evals_total,grad_evals_total,loss_evals_parallel,grad_evals_parallel,beta_min,beta_max,wall_seconds";

/// Global loss over all points, isolated local losses over each `D_j`, and
/// the global loss restricted to each `D_j` for gradient differences.
pub fn build_objective(
    problem: &Problem,
    decomp: &Decomposition,
    subnet: &SubnetConfig,
    colloc: &CollocationSet,
) -> Result<PinnObjective> {
    let n = colloc.points.len();
    let norm = 1.0 / n as f64;
    let global = Assembly::global(problem, decomp, subnet, &colloc.points, norm)?;
    let mut locals = Vec::with_capacity(colloc.assignment.len());
    let mut probes = Vec::with_capacity(colloc.assignment.len());
    for (j, members) in colloc.assignment.iter().enumerate() {
        if members.is_empty() {
            locals.push(None);
            probes.push(None);
            continue;
        }
        let pts: Vec<Vec<f64>> = members.iter().map(|&i| colloc.points[i].clone()).collect();
        locals.push(Some(Assembly::local(problem, decomp, subnet, j, &pts)?));
        probes.push(Some(Assembly::global(problem, decomp, subnet, &pts, norm)?));
    }
    let layout = crate::params::BlockLayout::from_sizes(&vec![subnet.n_params(); decomp.n_subdomains()]);
    Ok(PinnObjective::new(layout, global, locals, probes))
}

/// Everything a run needs, built deterministically from a config.
pub struct Setup {
    pub problem: Problem,
    pub model: FbpinnModel,
    pub colloc: CollocationSet,
    pub objective: PinnObjective,
    pub validation: Assembly,
    pub truth: Vec<f64>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let problem = problem_by_name(&cfg.problem)?;
        let decomp = build_decomposition(&problem.domain, &cfg.subdomains, cfg.overlap_ratio)?;
        let subnet = SubnetConfig::new(problem.dim(), cfg.width, cfg.blocks)?;
        let model = FbpinnModel::init(decomp, subnet, cfg.seed)?;
        let colloc = assign(&model.decomp, hammersley(cfg.points, &problem.domain))?;
        let objective = build_objective(&problem, &model.decomp, &subnet, &colloc)?;
        let (vpoints, truth) = validation_set(&problem, &cfg.validation)?;
        let validation = Assembly::global(&problem, &model.decomp, &subnet, &vpoints, 1.0)?;
        Ok(Self {
            problem,
            model,
            colloc,
            objective,
            validation,
            truth,
        })
    }

    /// Relative L2 error of the lifted model with parameters `theta`.
    pub fn l2(&self, theta: &[f64]) -> Result<f64> {
        relative_l2(&self.validation.values(theta), &self.truth)
    }

    pub fn run(&self, mp: &MpConfig) -> Result<Trace> {
        mp_lbfgs_run(&self.objective, self.model.theta.values.clone(), mp, &mut |th| self.l2(th))
    }
}

pub struct Experiment {
    pub trace: Trace,
    pub model: FbpinnModel,
}

/// Builds the setup, trains, and writes the trace CSV and final checkpoint
/// when paths are configured. An aborted run still writes its partial
/// trace; check `trace.aborted`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Experiment> {
    let setup = Setup::new(cfg)?;
    let trace = setup.run(&cfg.mp())?;
    let mut model = setup.model;
    model.set_theta(&trace.theta)?;
    if let Some(path) = &cfg.output_csv {
        let mut w = BufWriter::new(File::create(path)?);
        write_trace_csv(&trace, &mut w, cfg.wall_clock)?;
        w.flush()?;
    }
    if let Some(path) = &cfg.checkpoint {
        save_checkpoint(path, &model.theta)?;
    }
    Ok(Experiment { trace, model })
}

/// One row per epoch; reals with 17 significant digits.
pub fn write_trace_csv<W: Write>(trace: &Trace, out: &mut W, wall_clock: bool) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &trace.records {
        let c = &r.counters;
        let wall = if wall_clock { r.wall_seconds } else { 0.0 };
        writeln!(
            out,
            "{},{:.16e},{:.16e},{},{},{},{},{:.16e},{:.16e},{:.16e}",
            r.epoch,
            r.loss,
            r.l2,
            c.loss_evals_total,
            c.grad_evals_total,
            c.loss_evals_parallel,
            c.grad_evals_parallel,
            r.beta_min,
            r.beta_max,
            wall
        )?;
    }
    Ok(())
}
