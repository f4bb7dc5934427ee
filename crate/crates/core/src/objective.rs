//! Loss functions as seen by the optimizers.

use crate::error::Result;
use crate::params::BlockLayout;
use crate::problems::Assembly;

/// A differentiable scalar loss over a flat parameter vector.
pub trait Objective {
    fn dim(&self) -> usize;

    fn loss(&self, theta: &[f64]) -> Result<f64>;

    /// Loss and gradient; `grad` is overwritten.
    fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Loss and directional derivative `∇L(θ)·dir`.
    fn loss_slope(&self, theta: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        let mut g = vec![0.0; theta.len()];
        let loss = self.loss_grad(theta, &mut g)?;
        Ok((loss, dot(&g, dir)))
    }
}

/// An objective whose parameters split into blocks, each with its own local
/// subproblem.
pub trait SplitObjective: Objective + Sync {
    fn layout(&self) -> &BlockLayout;

    /// Local objective of block `j` near `theta`, over `θ_j` alone. `None`
    /// when the block has no local data.
    fn local(&self, j: usize, theta: &[f64]) -> Option<Box<dyn Objective + '_>>;

    /// `∇L(θ + R_jᵀ step) − ∇L(θ)`. The default evaluates two full
    /// gradients; implementations may restrict the work to the points that
    /// block `j` influences.
    fn grad_delta(&self, theta: &[f64], j: usize, step: &[f64]) -> Result<Vec<f64>> {
        let mut moved = theta.to_vec();
        for (m, s) in moved[self.layout().range(j)].iter_mut().zip(step) {
            *m += s;
        }
        let (mut g0, mut g1) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
        self.loss_grad(theta, &mut g0)?;
        self.loss_grad(&moved, &mut g1)?;
        Ok(g1.iter().zip(&g0).map(|(a, b)| a - b).collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

impl Objective for Assembly {
    fn dim(&self) -> usize {
        self.n_params()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        Assembly::loss(self, theta)
    }

    fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        Assembly::loss_grad(self, theta, grad)
    }

    fn loss_slope(&self, theta: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        Assembly::loss_slope(self, theta, dir)
    }
}

/// The FBPINN physics loss with its isolated local losses.
#[derive(Debug, Clone)]
pub struct PinnObjective {
    layout: BlockLayout,
    global: Assembly,
    locals: Vec<Option<Assembly>>,
    /// Global loss restricted to `D_j`, for gradient differences.
    probes: Vec<Option<Assembly>>,
}

impl PinnObjective {
    pub fn new(layout: BlockLayout, global: Assembly, locals: Vec<Option<Assembly>>, probes: Vec<Option<Assembly>>) -> Self {
        Self {
            layout,
            global,
            locals,
            probes,
        }
    }

    pub fn global(&self) -> &Assembly {
        &self.global
    }
}

impl Objective for PinnObjective {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        self.global.loss(theta)
    }

    fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.global.loss_grad(theta, grad)
    }

    fn loss_slope(&self, theta: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        self.global.loss_slope(theta, dir)
    }
}

impl SplitObjective for PinnObjective {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn local(&self, j: usize, _theta: &[f64]) -> Option<Box<dyn Objective + '_>> {
        self.locals[j].as_ref().map(|a| Box::new(a) as Box<dyn Objective>)
    }

    fn grad_delta(&self, theta: &[f64], j: usize, step: &[f64]) -> Result<Vec<f64>> {
        let Some(probe) = &self.probes[j] else {
            return Ok(vec![0.0; theta.len()]);
        };
        let mut moved = theta.to_vec();
        for (m, s) in moved[self.layout.range(j)].iter_mut().zip(step) {
            *m += s;
        }
        let (mut g0, mut g1) = (vec![0.0; theta.len()], vec![0.0; theta.len()]);
        probe.loss_grad(theta, &mut g0)?;
        probe.loss_grad(&moved, &mut g1)?;
        Ok(g1.iter().zip(&g0).map(|(a, b)| a - b).collect())
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn loss(&self, theta: &[f64]) -> Result<f64> {
        (**self).loss(theta)
    }
    fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).loss_grad(theta, grad)
    }
    fn loss_slope(&self, theta: &[f64], dir: &[f64]) -> Result<(f64, f64)> {
        (**self).loss_slope(theta, dir)
    }
}

/// `L(θ) = ½θᵀAθ − bᵀθ` with a block layout. Local objectives vary one
/// block with the others frozen.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub layout: BlockLayout,
}

impl Quadratic {
    fn apply(&self, theta: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| dot(row, theta)).collect()
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn loss(&self, theta: &[f64]) -> Result<f64> {
        Ok(0.5 * dot(&self.apply(theta), theta) - dot(&self.b, theta))
    }

    fn loss_grad(&self, theta: &[f64], grad: &mut [f64]) -> Result<f64> {
        let at = self.apply(theta);
        for ((g, a), b) in grad.iter_mut().zip(&at).zip(&self.b) {
            *g = a - b;
        }
        Ok(0.5 * dot(&at, theta) - dot(&self.b, theta))
    }
}

struct Frozen<'a> {
    q: &'a Quadratic,
    base: Vec<f64>,
    j: usize,
}

impl Frozen<'_> {
    fn embed(&self, theta_j: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        full[self.q.layout.range(self.j)].copy_from_slice(theta_j);
        full
    }
}

impl Objective for Frozen<'_> {
    fn dim(&self) -> usize {
        self.q.layout.block_len(self.j)
    }

    fn loss(&self, theta_j: &[f64]) -> Result<f64> {
        self.q.loss(&self.embed(theta_j))
    }

    fn loss_grad(&self, theta_j: &[f64], grad: &mut [f64]) -> Result<f64> {
        let full = self.embed(theta_j);
        let mut g = vec![0.0; full.len()];
        let loss = self.q.loss_grad(&full, &mut g)?;
        grad.copy_from_slice(&g[self.q.layout.range(self.j)]);
        Ok(loss)
    }
}

impl SplitObjective for Quadratic {
    fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    fn local(&self, j: usize, theta: &[f64]) -> Option<Box<dyn Objective + '_>> {
        Some(Box::new(Frozen {
            q: self,
            base: theta.to_vec(),
            j,
        }))
    }
}
