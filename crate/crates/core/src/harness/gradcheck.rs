use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{grad, Jet2};
use crate::error::Result;
use crate::geometry::{build_decomposition, hammersley};
use crate::model::{fbpinn_jet, FbpinnModel, SubnetConfig};
use crate::problems::{burgers_problem, physics_loss_with, poisson_problem, Assembly, Problem};

const MODELS: usize = 20;
const GRAD_TOL: f64 = 1e-6;
const JET_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheck {
    pub seed: u64,
    pub problem: &'static str,
    pub n_params: usize,
    /// Worst componentwise relative error against central differences.
    pub fd_error: f64,
    /// Worst relative difference between the batched and tape gradients.
    pub route_error: f64,
    /// Worst spatial-jet error against five-point differences.
    pub jet_error: f64,
}

impl ModelCheck {
    pub fn passed(&self) -> bool {
        self.fd_error < GRAD_TOL && self.route_error < GRAD_TOL && self.jet_error < JET_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub models: Vec<ModelCheck>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        !self.models.is_empty() && self.models.iter().all(ModelCheck::passed)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.models {
            writeln!(
                f,
                "{} seed {:>6} p={:<4} fd {:.2e} route {:.2e} jet {:.2e} {}",
                m.problem,
                m.seed,
                m.n_params,
                m.fd_error,
                m.route_error,
                m.jet_error,
                if m.passed() { "ok" } else { "FAIL" }
            )?;
        }
        write!(f, "{}", if self.passed() { "gradcheck passed" } else { "gradcheck FAILED" })
    }
}

/// Relative error with a denominator floor of `1e-3·‖g‖∞`, so components
/// that are tiny compared to the whole gradient are judged on an absolute
/// scale.
fn rel_errors(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-3 * scale;
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn random_model(problem: &Problem, rng: &mut ChaCha8Rng, seed: u64) -> Result<FbpinnModel> {
    let counts = if problem.dim() == 1 { vec![rng.random_range(1..=3)] } else { vec![2, rng.random_range(1..=2)] };
    let decomp = build_decomposition(&problem.domain, &counts, 0.4)?;
    let cfg = SubnetConfig::new(problem.dim(), rng.random_range(3..=6), rng.random_range(0..=2))?;
    let mut m = FbpinnModel::init(decomp, cfg, seed)?;
    for v in m.theta.values.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    Ok(m)
}

/// Five-point first and second differences of `f` along `axis`.
fn fd5(f: impl Fn(&[f64]) -> f64, x: &[f64], axis: usize, h: f64) -> (f64, f64) {
    let at = |s: f64| {
        let mut y = x.to_vec();
        y[axis] += s * h;
        f(&y)
    };
    let (m2, m1, c, p1, p2) = (at(-2.0), at(-1.0), at(0.0), at(1.0), at(2.0));
    (
        (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
        (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h),
    )
}

/// Checks gradients of the physics loss on 20 seeded random models (1-D and
/// 2-D Poisson, Burgers): the batched reverse pass against central
/// differences with step `1e-6·(1 + |θ_i|)` and against the scalar tape, and
/// spatial jets of the network against five-point differences (`h = 1e-4`).
pub fn gradcheck(seed: u64) -> Result<GradcheckReport> {
    let problems = [poisson_problem(1)?, poisson_problem(2)?, burgers_problem()];
    let mut models = Vec::with_capacity(MODELS);
    for i in 0..MODELS {
        let mseed = seed.wrapping_mul(1000).wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(mseed);
        let problem = &problems[i % problems.len()];
        let model = random_model(problem, &mut rng, mseed)?;
        let pts: Vec<Vec<f64>> = hammersley(12, &problem.domain).into_iter().skip(1).collect();
        let asm = Assembly::global(problem, &model.decomp, &model.subnet, &pts, 1.0 / pts.len() as f64)?;
        let theta = model.theta.values.clone();

        let mut g = vec![0.0; theta.len()];
        asm.loss_grad(&theta, &mut g)?;
        let fd = (0..theta.len())
            .map(|k| asm.central_difference(&theta, k, 1e-6 * (1.0 + theta[k].abs())))
            .collect::<Result<Vec<f64>>>()?;
        let (_, tape_g) = grad(|th| physics_loss_with(problem, &model, th, &pts).unwrap(), &theta)?;

        let mut jet_error = 0.0f64;
        for x in pts.iter().take(5) {
            let jet: Jet2<f64> = fbpinn_jet(&model, &theta, x)?;
            for axis in 0..problem.dim() {
                let (d1, d2) = fd5(|y| model.forward(y).unwrap(), x, axis, 1e-4);
                jet_error = jet_error
                    .max((jet.d1[axis] - d1).abs() / (1.0 + d1.abs()))
                    .max((jet.d2[axis] - d2).abs() / (1.0 + d2.abs()));
            }
        }
        models.push(ModelCheck {
            seed: mseed,
            problem: problem.name(),
            n_params: theta.len(),
            fd_error: rel_errors(&g, &fd),
            route_error: rel_errors(&g, &tape_g),
            jet_error,
        });
    }
    Ok(GradcheckReport { models })
}
