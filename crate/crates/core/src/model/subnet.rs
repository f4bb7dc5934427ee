use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Jet2, Scalar};
use crate::error::{Error, Result};

/// Residual tanh network `ℝ^d → ℝ`:
///
/// ```text
/// h₀     = W_in ξ + b_in
/// h_{i+1} = h_i + tanh(W_i h_i + b_i)     i = 0..blocks
/// out    = w_outᵀ h_B + b_out
/// ```
///
/// Parameters are stored flat in that order, matrices row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubnetConfig {
    pub input_dim: usize,
    pub width: usize,
    pub blocks: usize,
}

impl SubnetConfig {
    pub fn new(input_dim: usize, width: usize, blocks: usize) -> Result<Self> {
        if input_dim == 0 || width == 0 {
            return Err(Error::InvalidConfig(format!(
                "subnet needs input_dim >= 1 and width >= 1 (got {input_dim}, {width})"
            )));
        }
        Ok(Self {
            input_dim,
            width,
            blocks,
        })
    }

    pub fn n_params(&self) -> usize {
        let (d, h) = (self.input_dim, self.width);
        d * h + h + self.blocks * (h * h + h) + h + 1
    }

    pub(crate) fn offsets(&self) -> Offsets {
        let (d, h) = (self.input_dim, self.width);
        let w_in = 0;
        let b_in = w_in + d * h;
        let blocks = b_in + h;
        let w_out = blocks + self.blocks * (h * h + h);
        Offsets {
            w_in,
            b_in,
            blocks,
            w_out,
            b_out: w_out + h,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Offsets {
    pub w_in: usize,
    pub b_in: usize,
    pub blocks: usize,
    pub w_out: usize,
    pub b_out: usize,
}

impl Offsets {
    /// `(W, b)` offsets of residual block `l`.
    pub fn block(&self, cfg: &SubnetConfig, l: usize) -> (usize, usize) {
        let h = cfg.width;
        let w = self.blocks + l * (h * h + h);
        (w, w + h * h)
    }
}

fn check_len(cfg: &SubnetConfig, n: usize) -> Result<()> {
    if n != cfg.n_params() {
        return Err(Error::Layout(format!(
            "subnet expects {} parameters, got {n}",
            cfg.n_params()
        )));
    }
    Ok(())
}

/// Subnet output as a spatial jet, generic over the scalar type so the same
/// code runs on `f64` and on tape variables.
pub fn subnet_forward_jet<T: Scalar>(cfg: &SubnetConfig, theta: &[T], xi: &[Jet2<T>]) -> Result<Jet2<T>> {
    check_len(cfg, theta.len())?;
    let (d, h) = (cfg.input_dim, cfg.width);
    let off = cfg.offsets();
    let mut state: Vec<Jet2<T>> = (0..h)
        .map(|i| {
            let mut acc = Jet2::constant(theta[off.b_in + i]);
            for k in 0..d {
                acc = acc + Jet2::constant(theta[off.w_in + i * d + k]) * xi[k];
            }
            acc
        })
        .collect();
    for l in 0..cfg.blocks {
        let (w, b) = off.block(cfg, l);
        let next: Vec<Jet2<T>> = (0..h)
            .map(|i| {
                let mut z = Jet2::constant(theta[b + i]);
                for (k, s) in state.iter().enumerate() {
                    z = z + Jet2::constant(theta[w + i * h + k]) * *s;
                }
                state[i] + z.tanh()
            })
            .collect();
        state = next;
    }
    let mut out = Jet2::constant(theta[off.b_out]);
    for (i, s) in state.iter().enumerate() {
        out = out + Jet2::constant(theta[off.w_out + i]) * *s;
    }
    Ok(out)
}

/// Plain evaluation at a normalized point.
pub fn subnet_forward(cfg: &SubnetConfig, theta: &[f64], xi: &[f64]) -> Result<f64> {
    let xs: Vec<Jet2<f64>> = xi.iter().map(|&v| Jet2::constant(v)).collect();
    Ok(subnet_forward_jet(cfg, theta, &xs)?.v)
}

/// Glorot-uniform weights (bound `√(6/(fan_in+fan_out))`), zero biases.
pub fn init_params(cfg: &SubnetConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (d, h) = (cfg.input_dim, cfg.width);
    let off = cfg.offsets();
    let mut theta = vec![0.0; cfg.n_params()];
    let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in slice {
            *v = rng.random_range(-bound..bound);
        }
    };
    fill(&mut theta[off.w_in..off.b_in], d, h);
    for l in 0..cfg.blocks {
        let (w, b) = off.block(cfg, l);
        fill(&mut theta[w..b], h, h);
    }
    fill(&mut theta[off.w_out..off.b_out], h, 1);
    theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_parameters_give_zero() {
        let cfg = SubnetConfig::new(2, 5, 2).unwrap();
        let theta = vec![0.0; cfg.n_params()];
        assert_eq!(subnet_forward(&cfg, &theta, &[0.3, -0.8]).unwrap(), 0.0);
    }

    #[test]
    fn width_one_identity() {
        let cfg = SubnetConfig::new(1, 1, 0).unwrap();
        assert_eq!(cfg.n_params(), 4);
        let theta = [1.0, 0.0, 1.0, 0.0];
        assert_eq!(subnet_forward(&cfg, &theta, &[0.3]).unwrap(), 0.3);
    }

    #[test]
    fn parameter_count_of_default_2d_net() {
        let cfg = SubnetConfig::new(2, 20, 2).unwrap();
        assert_eq!(cfg.n_params(), 2 * 20 + 20 + 2 * (20 * 20 + 20) + 20 + 1);
        assert_eq!(cfg.n_params(), 921);
    }

    #[test]
    fn length_mismatch_is_layout_error() {
        let cfg = SubnetConfig::new(1, 3, 1).unwrap();
        assert!(matches!(subnet_forward(&cfg, &[0.0; 5], &[0.1]), Err(Error::Layout(_))));
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let cfg = SubnetConfig::new(2, 20, 2).unwrap();
        let a = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        let b = init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let off = cfg.offsets();
        assert!(a[off.b_in..off.blocks].iter().all(|&v| v == 0.0));
        assert_eq!(a[off.b_out], 0.0);
        let bound = (6.0f64 / 22.0).sqrt();
        assert!(a[off.w_in..off.b_in].iter().all(|v| v.abs() < bound));
    }
}
