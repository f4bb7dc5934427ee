//! Precomputed collocation data for the batched loss and gradient.

use ndarray::{Array2, ArrayView2};

use super::Problem;
use crate::autodiff::{Jet2, MAX_AXES};
use crate::error::{Error, Result};
use crate::geometry::Decomposition;
use crate::model::batch::{self, n_components};
use crate::model::SubnetConfig;

/// Points handled by one subnet.
#[derive(Debug, Clone)]
struct Batch {
    /// Parameter block read from the `theta` passed to the evaluators.
    param: usize,
    /// Normalized coordinates, `d × P`.
    xi: Array2<f64>,
    scale: Vec<f64>,
    /// Point index of each column.
    slots: Vec<usize>,
    /// Jet multiplying the subnet output at each column.
    mult: Vec<Jet2<f64>>,
}

/// A physics loss `norm · Σ_i r(û_i)²` with
/// `û_i = offset_i + Σ_j mult_ij ⊙ N_j(ξ_ij)`, stored so that each subnet
/// runs once over all its points.
#[derive(Debug, Clone)]
pub struct Assembly {
    problem: Problem,
    subnet: SubnetConfig,
    axes: usize,
    offset: Vec<Jet2<f64>>,
    forcing: Vec<f64>,
    batches: Vec<Batch>,
    n_blocks: usize,
    norm: f64,
}

/// `u += m · o` for jets, where `o` is column `q` of a `K × P` output.
fn accumulate(u: &mut Jet2<f64>, m: &Jet2<f64>, o: &ArrayView2<f64>, q: usize, axes: usize) {
    let ov = o[[0, q]];
    u.v += m.v * ov;
    for k in 0..axes {
        let (o1, o2) = (o[[1 + k, q]], o[[1 + axes + k, q]]);
        u.d1[k] += m.d1[k] * ov + m.v * o1;
        u.d2[k] += m.d2[k] * ov + 2.0 * m.d1[k] * o1 + m.v * o2;
    }
}

impl Assembly {
    /// Global loss over `points` with the lifted FBPINN; `norm` is usually
    /// `1/points.len()`, but subsets of a larger set keep the global factor.
    pub fn global(
        problem: &Problem,
        decomp: &Decomposition,
        subnet: &SubnetConfig,
        points: &[Vec<f64>],
        norm: f64,
    ) -> Result<Self> {
        check_dims(problem, decomp, subnet)?;
        let mut parts: Vec<Part> = (0..decomp.n_subdomains()).map(|_| Part::default()).collect();
        let mut offset = Vec::with_capacity(points.len());
        let mut forcing = Vec::with_capacity(points.len());
        for (i, x) in points.iter().enumerate() {
            let (ell, off) = problem.lifting(x);
            for (j, w) in decomp.window_jets(x)? {
                parts[j].push(decomp, j, x, i, ell * w);
            }
            offset.push(off);
            forcing.push(problem.forcing(x));
        }
        let batches = parts
            .into_iter()
            .enumerate()
            .filter(|(_, p)| !p.slots.is_empty())
            .map(|(j, p)| p.finish(decomp, j, j))
            .collect();
        Ok(Self {
            problem: problem.clone(),
            subnet: *subnet,
            axes: problem.dim(),
            offset,
            forcing,
            batches,
            n_blocks: decomp.n_subdomains(),
            norm,
        })
    }

    /// Isolated local loss of subdomain `j`: raw window times `N_j`, no
    /// lifting, mean over `points`. Evaluators take `θ_j` alone.
    pub fn local(
        problem: &Problem,
        decomp: &Decomposition,
        subnet: &SubnetConfig,
        j: usize,
        points: &[Vec<f64>],
    ) -> Result<Self> {
        check_dims(problem, decomp, subnet)?;
        if points.is_empty() {
            return Err(Error::InvalidConfig(format!("subdomain {j} has no points")));
        }
        let mut part = Part::default();
        for (i, x) in points.iter().enumerate() {
            if !decomp.contains(j, x) {
                return Err(Error::Geometry(format!("point {x:?} outside subdomain {j}")));
            }
            part.push(decomp, j, x, i, decomp.raw_window_jet(j, x));
        }
        Ok(Self {
            problem: problem.clone(),
            subnet: *subnet,
            axes: problem.dim(),
            offset: vec![Jet2::constant(0.0); points.len()],
            forcing: points.iter().map(|x| problem.forcing(x)).collect(),
            batches: vec![part.finish(decomp, j, 0)],
            n_blocks: 1,
            norm: 1.0 / points.len() as f64,
        })
    }

    pub fn n_points(&self) -> usize {
        self.offset.len()
    }

    /// Length of the `theta` the evaluators expect.
    pub fn n_params(&self) -> usize {
        self.n_blocks * self.subnet.n_params()
    }

    /// Parameter blocks this assembly reads.
    pub fn blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.batches.iter().map(|b| b.param)
    }

    fn block<'a>(&self, theta: &'a [f64], param: usize) -> &'a [f64] {
        let n = self.subnet.n_params();
        &theta[param * n..(param + 1) * n]
    }

    fn combine(&self, outs: &[Array2<f64>], axes: usize) -> Vec<Jet2<f64>> {
        let mut u = self.offset.clone();
        for (b, o) in self.batches.iter().zip(outs) {
            let o = o.view();
            for (q, (&slot, m)) in b.slots.iter().zip(&b.mult).enumerate() {
                accumulate(&mut u[slot], m, &o, q, axes);
            }
        }
        u
    }

    fn residuals(&self, u: &[Jet2<f64>]) -> Vec<f64> {
        u.iter()
            .zip(&self.forcing)
            .map(|(u, &f)| self.problem.residual_with_forcing(u, f))
            .collect()
    }

    fn reduce(&self, r: &[f64]) -> Result<f64> {
        let loss = self.norm * r.iter().map(|r| r * r).sum::<f64>();
        if loss.is_finite() {
            Ok(loss)
        } else {
            Err(Error::Evaluation("non-finite physics loss".into()))
        }
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        let outs: Vec<Array2<f64>> = self
            .batches
            .iter()
            .map(|b| batch::forward(&self.subnet, self.block(theta, b.param), b.xi.view(), &b.scale, self.axes, false).0)
            .collect();
        self.reduce(&self.residuals(&self.combine(&outs, self.axes)))
    }

    /// Central difference quotient `(L(θ + h e_k) − L(θ − h e_k)) / 2h`,
    /// evaluated as `Σ (r₊ − r₋)(r₊ + r₋)` with the forcing cancelled
    /// exactly, so a large loss does not swamp the difference.
    pub fn central_difference(&self, theta: &[f64], k: usize, h: f64) -> Result<f64> {
        let operator = |th: &[f64]| -> Vec<f64> {
            let outs: Vec<Array2<f64>> = self
                .batches
                .iter()
                .map(|b| batch::forward(&self.subnet, self.block(th, b.param), b.xi.view(), &b.scale, self.axes, false).0)
                .collect();
            self.combine(&outs, self.axes)
                .iter()
                .map(|u| self.problem.residual_with_forcing(u, 0.0))
                .collect()
        };
        let mut probe = theta.to_vec();
        probe[k] = theta[k] + h;
        let up = operator(&probe);
        probe[k] = theta[k] - h;
        let dn = operator(&probe);
        let sum: f64 = up
            .iter()
            .zip(&dn)
            .zip(&self.forcing)
            .map(|((a, b), f)| (a - b) * (a + b - 2.0 * f))
            .sum();
        let q = self.norm * sum / (2.0 * h);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(Error::Evaluation("non-finite difference quotient".into()))
        }
    }

    /// Loss and its full gradient, written into `grad` (same length as
    /// `theta`).
    pub fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        assert_eq!(theta.len(), grad.len());
        let mut outs = Vec::with_capacity(self.batches.len());
        let mut traces = Vec::with_capacity(self.batches.len());
        for b in &self.batches {
            let (o, t) = batch::forward(&self.subnet, self.block(theta, b.param), b.xi.view(), &b.scale, self.axes, true);
            outs.push(o);
            traces.push(t.unwrap());
        }
        let u = self.combine(&outs, self.axes);
        let r = self.residuals(&u);
        let loss = self.reduce(&r)?;

        let ubar: Vec<Jet2<f64>> = u
            .iter()
            .zip(&r)
            .map(|(u, &r)| self.problem.residual_partials(u).scale(2.0 * self.norm * r))
            .collect();
        grad.fill(0.0);
        let n = self.subnet.n_params();
        let kc = n_components(self.axes);
        for (b, trace) in self.batches.iter().zip(&traces) {
            let p = b.slots.len();
            let mut obar = Array2::zeros((kc, p));
            for (q, (&slot, m)) in b.slots.iter().zip(&b.mult).enumerate() {
                let ub = &ubar[slot];
                let mut ov = ub.v * m.v;
                for k in 0..self.axes {
                    ov += ub.d1[k] * m.d1[k] + ub.d2[k] * m.d2[k];
                    obar[[1 + k, q]] = ub.d1[k] * m.v + 2.0 * ub.d2[k] * m.d1[k];
                    obar[[1 + self.axes + k, q]] = ub.d2[k] * m.v;
                }
                obar[[0, q]] = ov;
            }
            let g = &mut grad[b.param * n..(b.param + 1) * n];
            batch::backward(
                &self.subnet,
                self.block(theta, b.param),
                trace,
                b.xi.view(),
                &b.scale,
                self.axes,
                obar.view(),
                g,
            );
        }
        Ok(loss)
    }

    /// Loss at `theta` and its directional derivative along `dir`.
    pub fn loss_slope(&self, theta: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        assert_eq!(theta.len(), dir.len());
        let mut outs = Vec::with_capacity(self.batches.len());
        let mut douts = Vec::with_capacity(self.batches.len());
        for b in &self.batches {
            let (o, d) = batch::jvp(
                &self.subnet,
                self.block(theta, b.param),
                self.block(dir, b.param),
                b.xi.view(),
                &b.scale,
                self.axes,
            );
            outs.push(o);
            douts.push(d);
        }
        let u = self.combine(&outs, self.axes);
        let r = self.residuals(&u);
        let loss = self.reduce(&r)?;
        let mut du = vec![Jet2::constant(0.0); u.len()];
        for (b, d) in self.batches.iter().zip(&douts) {
            let d = d.view();
            for (q, (&slot, m)) in b.slots.iter().zip(&b.mult).enumerate() {
                accumulate(&mut du[slot], m, &d, q, self.axes);
            }
        }
        let mut slope = 0.0;
        for ((u, du), &r) in u.iter().zip(&du).zip(&r) {
            let p = self.problem.residual_partials(u);
            let mut rdot = p.v * du.v;
            for k in 0..MAX_AXES {
                rdot += p.d1[k] * du.d1[k] + p.d2[k] * du.d2[k];
            }
            slope += 2.0 * r * rdot;
        }
        let slope = self.norm * slope;
        if !slope.is_finite() {
            return Err(Error::Evaluation("non-finite directional derivative".into()));
        }
        Ok((loss, slope))
    }

    /// Values `û_i` only (no spatial derivatives).
    pub fn values(&self, theta: &[f64]) -> Vec<f64> {
        let outs: Vec<Array2<f64>> = self
            .batches
            .iter()
            .map(|b| batch::forward(&self.subnet, self.block(theta, b.param), b.xi.view(), &b.scale, 0, false).0)
            .collect();
        self.combine(&outs, 0).into_iter().map(|u| u.v).collect()
    }
}

fn check_dims(problem: &Problem, decomp: &Decomposition, subnet: &SubnetConfig) -> Result<()> {
    if decomp.dim() != problem.dim() || subnet.input_dim != problem.dim() {
        return Err(Error::InvalidConfig(format!(
            "dimension mismatch: problem {}, decomposition {}, subnet {}",
            problem.dim(),
            decomp.dim(),
            subnet.input_dim
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Part {
    xi: Vec<f64>,
    slots: Vec<usize>,
    mult: Vec<Jet2<f64>>,
}

impl Part {
    fn push(&mut self, decomp: &Decomposition, j: usize, x: &[f64], slot: usize, mult: Jet2<f64>) {
        self.xi.extend(decomp.norm(j, x));
        self.slots.push(slot);
        self.mult.push(mult);
    }

    fn finish(self, decomp: &Decomposition, j: usize, param: usize) -> Batch {
        let d = decomp.dim();
        let p = self.slots.len();
        // collected point-major, stored axis-major
        let xi = Array2::from_shape_vec((p, d), self.xi).unwrap().reversed_axes().as_standard_layout().into_owned();
        Batch {
            param,
            xi,
            scale: decomp.norm_scale(j),
            slots: self.slots,
            mult: self.mult,
        }
    }
}
