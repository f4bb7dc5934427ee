//! Benchmark PDEs, hard boundary lifting and physics losses.

mod assembly;
mod reference;

use std::f64::consts::PI;

pub use assembly::Assembly;
pub use reference::{burgers_quadrature, burgers_reference, crank_nicolson, reference_pair, ReferenceField};

use crate::autodiff::{Jet2, Scalar};
use crate::error::{Error, Result};
use crate::geometry::{Decomposition, Domain};
use crate::model::{coordinate_jets, fbpinn_jet, subnet_forward_jet, FbpinnModel, SubnetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Poisson1d,
    Poisson2d,
    /// Viscous Burgers in `(t, x)`.
    Burgers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub kind: ProblemKind,
    pub domain: Domain,
    /// Kinematic viscosity (Burgers only).
    pub nu: f64,
}

/// `−Δu = f` on the unit interval or square.
pub fn poisson_problem(dim: usize) -> Result<Problem> {
    let kind = match dim {
        1 => ProblemKind::Poisson1d,
        2 => ProblemKind::Poisson2d,
        _ => return Err(Error::InvalidConfig(format!("poisson dimension {dim} not in {{1, 2}}"))),
    };
    Ok(Problem {
        kind,
        domain: Domain::unit(dim),
        nu: 0.0,
    })
}

/// `u_t + u u_x − ν u_xx = 0` on `(0,1) × (−1,1)` with `u(0,x) = −sin πx`.
pub fn burgers_problem() -> Problem {
    Problem {
        kind: ProblemKind::Burgers,
        domain: Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap(),
        nu: 0.01 / PI,
    }
}

pub fn problem_by_name(name: &str) -> Result<Problem> {
    match name {
        "poisson1d" => poisson_problem(1),
        "poisson2d" => poisson_problem(2),
        "burgers" => Ok(burgers_problem()),
        _ => Err(Error::InvalidConfig(format!("unknown problem '{name}'"))),
    }
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ProblemKind::Poisson1d => "poisson1d",
            ProblemKind::Poisson2d => "poisson2d",
            ProblemKind::Burgers => "burgers",
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn forcing(&self, x: &[f64]) -> f64 {
        match self.kind {
            ProblemKind::Poisson1d => 400.0 * PI * PI * (20.0 * PI * x[0]).sin(),
            ProblemKind::Poisson2d => {
                32.0 * PI * PI * (4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin()
            }
            ProblemKind::Burgers => 0.0,
        }
    }

    /// `(ℓ, C)` as spatial jets in `x`, all axes seeded.
    pub fn lifting(&self, x: &[f64]) -> (Jet2<f64>, Jet2<f64>) {
        match self.kind {
            ProblemKind::Poisson1d | ProblemKind::Poisson2d => {
                let mut ell = Jet2::constant(1.0);
                for (k, &v) in x.iter().enumerate() {
                    let mut f = Jet2::constant(4.0 * v * (1.0 - v));
                    f.d1[k] = 4.0 - 8.0 * v;
                    f.d2[k] = -8.0;
                    ell = ell * f;
                }
                (ell, Jet2::constant(0.0))
            }
            ProblemKind::Burgers => {
                let (t, xs) = (x[0], x[1]);
                let mut ell = Jet2::constant(t * (1.0 - xs * xs));
                ell.d1 = [1.0 - xs * xs, -2.0 * t * xs];
                ell.d2 = [0.0, -2.0 * t];
                let (s, c) = (PI * xs).sin_cos();
                let mut off = Jet2::constant(-s);
                off.d1[1] = -PI * c;
                off.d2[1] = PI * PI * s;
                (ell, off)
            }
        }
    }

    /// PDE residual of `u` given the forcing value at the point.
    pub fn residual_with_forcing<T: Scalar>(&self, u: &Jet2<T>, f: f64) -> T {
        match self.kind {
            ProblemKind::Poisson1d => -u.d2[0] - T::cst(f),
            ProblemKind::Poisson2d => -u.d2[0] - u.d2[1] - T::cst(f),
            ProblemKind::Burgers => u.d1[0] + u.v * u.d1[1] - u.d2[1].scale(self.nu) - T::cst(f),
        }
    }

    pub fn residual<T: Scalar>(&self, u: &Jet2<T>, x: &[f64]) -> T {
        self.residual_with_forcing(u, self.forcing(x))
    }

    /// Partial derivatives of the residual with respect to each jet
    /// component of `u`, packed as a jet.
    pub fn residual_partials(&self, u: &Jet2<f64>) -> Jet2<f64> {
        let mut p = Jet2::constant(0.0);
        match self.kind {
            ProblemKind::Poisson1d => p.d2[0] = -1.0,
            ProblemKind::Poisson2d => p.d2 = [-1.0, -1.0],
            ProblemKind::Burgers => {
                p.v = u.d1[1];
                p.d1 = [1.0, u.v];
                p.d2[1] = -self.nu;
            }
        }
        p
    }

    /// Closed-form solution, where one exists.
    pub fn exact(&self, x: &[f64]) -> Option<f64> {
        match self.kind {
            ProblemKind::Poisson1d => Some((20.0 * PI * x[0]).sin()),
            ProblemKind::Poisson2d => Some((4.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).sin()),
            ProblemKind::Burgers => None,
        }
    }
}

/// Uniform grid including the endpoints, `n ≥ 2`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Validation points and the true solution on them.
///
/// Poisson uses `n` (1-D) or `n × n` (2-D) grid points. Burgers uses an
/// `nt × nx` grid in `(t, x)` and the reference solution.
pub fn validation_set(problem: &Problem, sizes: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let b = &problem.domain.bounds;
    let grids: Vec<Vec<f64>> = match (problem.kind, sizes) {
        (ProblemKind::Poisson1d, [n]) => vec![linspace(b[0].0, b[0].1, *n)],
        (ProblemKind::Poisson2d, [n]) => vec![linspace(b[0].0, b[0].1, *n), linspace(b[1].0, b[1].1, *n)],
        (_, [n0, n1]) if problem.dim() == 2 => vec![linspace(b[0].0, b[0].1, *n0), linspace(b[1].0, b[1].1, *n1)],
        _ => {
            return Err(Error::InvalidConfig(format!(
                "validation grid {sizes:?} does not fit {}",
                problem.name()
            )))
        }
    };
    if sizes.iter().any(|&n| n < 2) {
        return Err(Error::InvalidConfig("validation grids need at least 2 points per axis".into()));
    }
    let points: Vec<Vec<f64>> = match grids.as_slice() {
        [g] => g.iter().map(|&x| vec![x]).collect(),
        [g0, g1] => g0
            .iter()
            .flat_map(|&a| g1.iter().map(move |&c| vec![a, c]))
            .collect(),
        _ => unreachable!(),
    };
    let truth = match problem.kind {
        ProblemKind::Burgers => burgers_reference(&grids[0], &grids[1])?.u.into_iter().collect(),
        _ => points.iter().map(|x| problem.exact(x).unwrap()).collect(),
    };
    Ok((points, truth))
}

/// Lifted solution `û = C + ℓ·N` as a spatial jet (straight-line route).
pub fn lifted_jet<T: Scalar>(problem: &Problem, model: &FbpinnModel, theta: &[T], x: &[f64]) -> Result<Jet2<T>> {
    let n = fbpinn_jet(model, theta, x)?;
    let (ell, off) = problem.lifting(x);
    Ok(off.lift() + ell.lift() * n)
}

/// Mean squared residual of the lifted solution, for any scalar type.
pub fn physics_loss_with<T: Scalar>(
    problem: &Problem,
    model: &FbpinnModel,
    theta: &[T],
    points: &[Vec<f64>],
) -> Result<T> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("physics loss over an empty point set".into()));
    }
    let mut acc = T::cst(0.0);
    for x in points {
        let r = problem.residual(&lifted_jet(problem, model, theta, x)?, x);
        acc = acc + r * r;
    }
    Ok(acc.scale(1.0 / points.len() as f64))
}

pub fn physics_loss(problem: &Problem, model: &FbpinnModel, points: &[Vec<f64>]) -> Result<f64> {
    physics_loss_with(problem, model, &model.theta.values, points)
}

/// Mean squared residual of the isolated windowed subnet `w_j·N_j`, with
/// the raw window and no lifting.
pub fn local_loss_with<T: Scalar>(
    problem: &Problem,
    decomp: &Decomposition,
    subnet: &SubnetConfig,
    j: usize,
    theta_j: &[T],
    points: &[Vec<f64>],
) -> Result<T> {
    if points.is_empty() {
        return Err(Error::InvalidConfig("local loss over an empty point set".into()));
    }
    let mut acc = T::cst(0.0);
    for x in points {
        let xi: Vec<Jet2<T>> = coordinate_jets(decomp, j, x).into_iter().map(Jet2::lift).collect();
        let u = decomp.raw_window_jet(j, x).lift() * subnet_forward_jet(subnet, theta_j, &xi)?;
        let r = problem.residual(&u, x);
        acc = acc + r * r;
    }
    Ok(acc.scale(1.0 / points.len() as f64))
}

pub fn local_loss(
    problem: &Problem,
    decomp: &Decomposition,
    subnet: &SubnetConfig,
    j: usize,
    theta_j: &[f64],
    points: &[Vec<f64>],
) -> Result<f64> {
    local_loss_with(problem, decomp, subnet, j, theta_j, points)
}

/// `‖û − u‖₂ / ‖u‖₂` over paired predictions and truth values.
pub fn relative_l2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::InvalidConfig(format!(
            "{} predictions for {} reference values",
            pred.len(),
            truth.len()
        )));
    }
    let den: f64 = truth.iter().map(|u| u * u).sum();
    if den == 0.0 {
        return Err(Error::UndefinedMetric);
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, u)| (p - u).powi(2)).sum();
    Ok((num / den).sqrt())
}

/// Relative L2 error of the lifted model on the given points.
pub fn model_relative_l2(model: &FbpinnModel, problem: &Problem, points: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    let pred = points
        .iter()
        .map(|x| model.lifted(problem, x))
        .collect::<Result<Vec<_>>>()?;
    relative_l2(&pred, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_decomposition, hammersley};

    /// Five-point first and second differences along axis `k`.
    fn fd5(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> (f64, f64) {
        let at = |s: f64| {
            let mut y = x.to_vec();
            y[k] += s * h;
            f(&y)
        };
        let (m2, m1, c, p1, p2) = (at(-2.0), at(-1.0), at(0.0), at(1.0), at(2.0));
        (
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h),
            (-m2 + 16.0 * m1 - 30.0 * c + 16.0 * p1 - p2) / (12.0 * h * h),
        )
    }

    fn exact_jet(problem: &Problem, x: &[f64]) -> Jet2<f64> {
        let s = |k: usize, w: f64| Jet2::variable(x[k], k).scale(w * PI).sin();
        match problem.kind {
            ProblemKind::Poisson1d => s(0, 20.0),
            _ => s(0, 4.0) * s(1, 4.0),
        }
    }

    #[test]
    fn exact_solutions_annihilate_poisson_residual() {
        for dim in [1, 2] {
            let p = poisson_problem(dim).unwrap();
            for x in hammersley(1000, &p.domain) {
                let r: f64 = p.residual(&exact_jet(&p, &x), &x);
                assert!(r.abs() < 1e-8 * (1.0 + p.forcing(&x).abs()), "{r}");
            }
        }
    }

    #[test]
    fn poisson_lifting_values() {
        let p = poisson_problem(2).unwrap();
        assert!((p.lifting(&[0.5, 0.5]).0.v - 1.0).abs() < 1e-15);
        assert_eq!(p.lifting(&[0.0, 0.3]).0.v, 0.0);
        assert!(p.exact(&[0.25, 0.125]).unwrap().abs() < 1e-15);
        assert!(poisson_problem(3).is_err());
    }

    #[test]
    fn lifting_jets_match_finite_differences() {
        for p in [poisson_problem(1).unwrap(), poisson_problem(2).unwrap(), burgers_problem()] {
            for x in hammersley(20, &p.domain).into_iter().skip(1) {
                let (ell, off) = p.lifting(&x);
                for k in 0..p.dim() {
                    let fl = fd5(|y| p.lifting(y).0.v, &x, k, 1e-3);
                    let fc = fd5(|y| p.lifting(y).1.v, &x, k, 1e-3);
                    assert!((fl.0 - ell.d1[k]).abs() < 1e-8 && (fl.1 - ell.d2[k]).abs() < 1e-5);
                    assert!((fc.0 - off.d1[k]).abs() < 1e-8 && (fc.1 - off.d2[k]).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn burgers_lifting_enforces_data() {
        let p = burgers_problem();
        for &x in &[-0.7, 0.0, 0.4] {
            let (ell, off) = p.lifting(&[0.0, x]);
            assert_eq!(ell.v, 0.0);
            assert!((off.v + (PI * x).sin()).abs() < 1e-15);
        }
        for &t in &[0.2, 1.0] {
            for &x in &[-1.0, 1.0] {
                let (ell, off) = p.lifting(&[t, x]);
                assert_eq!(ell.v, 0.0);
                assert!(off.v.abs() < 1e-15);
            }
        }
        let zero = Jet2::constant(0.0);
        assert_eq!(p.residual(&zero, &[0.5, 0.5]), 0.0);
    }

    #[test]
    fn residual_partials_match_finite_differences() {
        let p = burgers_problem();
        let u = Jet2 { v: 0.3, d1: [-1.2, 0.8], d2: [0.5, 2.0] };
        let part = p.residual_partials(&u);
        let h = 1e-6;
        let r0 = |u: &Jet2<f64>| p.residual_with_forcing(u, 0.0);
        let fd = |f: &dyn Fn(&mut Jet2<f64>, f64)| {
            let (mut a, mut b) = (u, u);
            f(&mut a, h);
            f(&mut b, -h);
            (r0(&a) - r0(&b)) / (2.0 * h)
        };
        assert!((fd(&|j, e| j.v += e) - part.v).abs() < 1e-8);
        assert!((fd(&|j, e| j.d1[0] += e) - part.d1[0]).abs() < 1e-8);
        assert!((fd(&|j, e| j.d1[1] += e) - part.d1[1]).abs() < 1e-8);
        assert!((fd(&|j, e| j.d2[1] += e) - part.d2[1]).abs() < 1e-8);
    }

    #[test]
    fn relative_l2_examples() {
        let u = [1.0, -2.0, 0.5];
        assert_eq!(relative_l2(&u, &u).unwrap(), 0.0);
        let twice: Vec<f64> = u.iter().map(|v| 2.0 * v).collect();
        assert!((relative_l2(&twice, &u).unwrap() - 1.0).abs() < 1e-15);
        assert!((relative_l2(&[0.0; 3], &u).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_l2(&u, &[0.0; 3]), Err(Error::UndefinedMetric)));
    }

    fn small_model(problem: &Problem, counts: &[usize], seed: u64) -> FbpinnModel {
        let d = build_decomposition(&problem.domain, counts, 0.4).unwrap();
        let cfg = SubnetConfig::new(problem.dim(), 4, 1).unwrap();
        FbpinnModel::init(d, cfg, seed).unwrap()
    }

    #[test]
    fn physics_loss_matches_hand_rolled_loop() {
        let p = poisson_problem(1).unwrap();
        let m = small_model(&p, &[3], 2);
        let pts = hammersley(9, &p.domain)[1..].to_vec();
        let mut acc = 0.0;
        for x in &pts {
            let (_, d2u) = fd5(|y| m.lifted(&p, y).unwrap(), x, 0, 1e-3);
            acc += (-d2u - p.forcing(x)).powi(2);
        }
        let hand = acc / pts.len() as f64;
        let loss = physics_loss(&p, &m, &pts).unwrap();
        assert!((loss - hand).abs() < 1e-6 * hand, "{loss} vs {hand}");
        assert!(physics_loss(&p, &m, &[]).is_err());
    }

    #[test]
    fn physics_loss_is_permutation_invariant() {
        let p = poisson_problem(2).unwrap();
        let m = small_model(&p, &[2, 2], 3);
        let pts = hammersley(40, &p.domain);
        let mut rev = pts.clone();
        rev.reverse();
        let a = physics_loss(&p, &m, &pts).unwrap();
        let b = physics_loss(&p, &m, &rev).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn local_loss_with_zero_parameters_is_mean_forcing_squared() {
        let p = poisson_problem(1).unwrap();
        let m = small_model(&p, &[2], 0);
        let pts: Vec<Vec<f64>> = hammersley(50, &p.domain).into_iter().filter(|x| m.decomp.contains(0, x)).collect();
        let zeros = vec![0.0; m.subnet.n_params()];
        let loss = local_loss(&p, &m.decomp, &m.subnet, 0, &zeros, &pts).unwrap();
        let want = pts.iter().map(|x| p.forcing(x).powi(2)).sum::<f64>() / pts.len() as f64;
        assert!((loss - want).abs() < 1e-12 * want);
        let single = local_loss(&p, &m.decomp, &m.subnet, 0, &zeros, &pts[..1]).unwrap();
        assert!((single - p.forcing(&pts[0]).powi(2)).abs() < 1e-9);
    }

    #[test]
    fn validation_grid_shapes() {
        let (pts, truth) = validation_set(&poisson_problem(1).unwrap(), &[512]).unwrap();
        assert_eq!(pts.len(), 512);
        assert_eq!(pts[511], vec![1.0]);
        assert_eq!(truth.len(), 512);
        let (pts, _) = validation_set(&poisson_problem(2).unwrap(), &[128]).unwrap();
        assert_eq!(pts.len(), 128 * 128);
        assert!(validation_set(&poisson_problem(2).unwrap(), &[1]).is_err());
    }
}
