//! Experiment configuration, cost accounting, training runs and checks.

mod config;
mod counters;
mod experiment;
mod gradcheck;

pub use config::ExperimentConfig;
pub use counters::{counters_check, predict_cost, Cost, CostReport, EvalCounters, IterationCost, Mismatch};
pub use experiment::{build_objective, run_experiment, write_trace_csv, Experiment, Setup, CSV_HEADER};
pub use gradcheck::{gradcheck, GradcheckReport, ModelCheck};

pub use crate::mp::Strategy;
