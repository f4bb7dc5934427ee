use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::subnet::{init_params, subnet_forward, subnet_forward_jet, SubnetConfig};
use crate::autodiff::{Jet2, Scalar};
use crate::error::{Error, Result};
use crate::geometry::Decomposition;
use crate::params::{BlockLayout, ParamVector};
use crate::problems::Problem;

/// `N(θ; x) = Σ_j w_j(x) N_j(θ_j; norm_j(x))` with one identical subnet
/// architecture per subdomain and disjoint parameter blocks.
#[derive(Debug, Clone)]
pub struct FbpinnModel {
    pub decomp: Decomposition,
    pub subnet: SubnetConfig,
    pub theta: ParamVector,
}

impl FbpinnModel {
    pub fn zeros(decomp: Decomposition, subnet: SubnetConfig) -> Result<Self> {
        if subnet.input_dim != decomp.dim() {
            return Err(Error::InvalidConfig(format!(
                "subnet input dimension {} does not match domain dimension {}",
                subnet.input_dim,
                decomp.dim()
            )));
        }
        let layout = BlockLayout::from_sizes(&vec![subnet.n_params(); decomp.n_subdomains()]);
        Ok(Self {
            decomp,
            subnet,
            theta: ParamVector::zeros(layout),
        })
    }

    /// Seeded Glorot initialization, subnets drawn in index order from one
    /// stream.
    pub fn init(decomp: Decomposition, subnet: SubnetConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(decomp, subnet)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for j in 0..model.n_subdomains() {
            let block = init_params(&model.subnet, &mut rng);
            model.theta.block_mut(j)?.copy_from_slice(&block);
        }
        Ok(model)
    }

    pub fn n_subdomains(&self) -> usize {
        self.decomp.n_subdomains()
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.theta.layout
    }

    pub fn set_theta(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.theta.len() {
            return Err(Error::Layout(format!(
                "{} values for {} parameters",
                values.len(),
                self.theta.len()
            )));
        }
        self.theta.values.copy_from_slice(values);
        Ok(())
    }

    /// Network output `N(θ; x)`; subdomains with zero window are skipped.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        let total: f64 = (0..self.n_subdomains()).map(|j| self.decomp.raw_window(j, x)).sum();
        if total <= 0.0 {
            return Err(Error::Geometry(format!("no window covers point {x:?}")));
        }
        let mut out = 0.0;
        for j in 0..self.n_subdomains() {
            let raw = self.decomp.raw_window(j, x);
            if raw == 0.0 {
                continue;
            }
            let xi = self.decomp.norm(j, x);
            out += raw / total * subnet_forward(&self.subnet, self.theta.restrict(j)?, &xi)?;
        }
        Ok(out)
    }

    /// Lifted solution `û(θ; x) = C(x) + ℓ(x) N(θ; x)`.
    pub fn lifted(&self, problem: &Problem, x: &[f64]) -> Result<f64> {
        let (ell, offset) = problem.lifting(x);
        Ok(offset.v + ell.v * self.forward(x)?)
    }
}

/// Coordinates of `ξ = norm_j(x)` as jets in `x`.
pub fn coordinate_jets(decomp: &Decomposition, j: usize, x: &[f64]) -> Vec<Jet2<f64>> {
    let xi = decomp.norm(j, x);
    let scale = decomp.norm_scale(j);
    xi.iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut s = Jet2::constant(v);
            s.d1[k] = scale[k];
            s
        })
        .collect()
}

/// `N(θ; x)` as a spatial jet for a generic parameter scalar. This is the
/// straight-line reference route; training uses [`super::batch`].
pub fn fbpinn_jet<T: Scalar>(model: &FbpinnModel, theta: &[T], x: &[f64]) -> Result<Jet2<T>> {
    let layout = model.layout();
    let mut out = Jet2::constant(T::cst(0.0));
    for (j, w) in model.decomp.window_jets(x)? {
        let xi: Vec<Jet2<T>> = coordinate_jets(&model.decomp, j, x)
            .into_iter()
            .map(Jet2::lift)
            .collect();
        let n = subnet_forward_jet(&model.subnet, &theta[layout.range(j)], &xi)?;
        out = out + w.lift() * n;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_decomposition, hammersley, Domain};

    fn constant_model(decomp: Decomposition, c: f64) -> FbpinnModel {
        let cfg = SubnetConfig::new(decomp.dim(), 4, 2).unwrap();
        let mut m = FbpinnModel::zeros(decomp, cfg).unwrap();
        let b_out = cfg.offsets().b_out;
        for j in 0..m.n_subdomains() {
            m.theta.block_mut(j).unwrap()[b_out] = c;
        }
        m
    }

    #[test]
    fn constant_subnets_reproduce_constant() {
        let dom = Domain::new(vec![(0.0, 1.0), (-1.0, 1.0)]).unwrap();
        let d = build_decomposition(&dom, &[4, 2], 0.4).unwrap();
        let m = constant_model(d, 1.7);
        for x in hammersley(500, &dom) {
            assert!((m.forward(&x).unwrap() - 1.7).abs() < 1e-12);
        }
    }

    #[test]
    fn single_subdomain_is_plain_subnet() {
        let d = build_decomposition(&Domain::unit(1), &[1], 0.4).unwrap();
        let cfg = SubnetConfig::new(1, 5, 2).unwrap();
        let m = FbpinnModel::init(d.clone(), cfg, 11).unwrap();
        for x in [0.0, 0.3, 0.99] {
            let direct = subnet_forward(&cfg, m.theta.restrict(0).unwrap(), &d.norm(0, &[x])).unwrap();
            assert!((m.forward(&[x]).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn point_inside_one_box_sees_only_that_subnet() {
        let d = build_decomposition(&Domain::unit(1), &[2], 0.4).unwrap();
        let cfg = SubnetConfig::new(1, 3, 1).unwrap();
        let m = FbpinnModel::init(d.clone(), cfg, 5).unwrap();
        let x = [0.1];
        let only = subnet_forward(&cfg, m.theta.restrict(0).unwrap(), &d.norm(0, &x)).unwrap();
        assert_eq!(m.forward(&x).unwrap(), only);
    }

    #[test]
    fn perturbing_a_block_is_local() {
        let d = build_decomposition(&Domain::unit(1), &[3], 0.4).unwrap();
        let cfg = SubnetConfig::new(1, 4, 2).unwrap();
        let m = FbpinnModel::init(d.clone(), cfg, 2).unwrap();
        let mut m2 = m.clone();
        for v in m2.theta.block_mut(0).unwrap() {
            *v += 0.3;
        }
        for x in hammersley(300, &Domain::unit(1)) {
            let changed = m.forward(&x).unwrap() != m2.forward(&x).unwrap();
            if changed {
                assert!(d.window(0, &x).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn jet_route_agrees_with_plain_forward() {
        let dom = Domain::unit(2);
        let d = build_decomposition(&dom, &[2, 2], 0.4).unwrap();
        let cfg = SubnetConfig::new(2, 4, 1).unwrap();
        let m = FbpinnModel::init(d, cfg, 9).unwrap();
        for x in hammersley(50, &dom) {
            let j = fbpinn_jet(&m, &m.theta.values, &x).unwrap();
            assert!((j.v - m.forward(&x).unwrap()).abs() < 1e-13);
        }
    }
}
