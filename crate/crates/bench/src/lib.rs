//! Fixtures shared by the kernel benchmarks.

use fbpinn_core::harness::Setup;
use fbpinn_core::{ExperimentConfig, Result, SecantMemory};

/// Training setup for 1-D Poisson with the given subdomain and point counts.
pub fn poisson1d_setup(subdomains: usize, points: usize) -> Result<Setup> {
    let mut cfg = ExperimentConfig::defaults("poisson1d");
    cfg.subdomains = vec![subdomains];
    cfg.points = points;
    cfg.validation = vec![64];
    Setup::new(&cfg)
}

/// A full secant memory of `m` well-conditioned pairs in dimension `n`,
/// plus a gradient to apply it to.
pub fn filled_memory(n: usize, m: usize) -> (SecantMemory, Vec<f64>) {
    let mut memory = SecantMemory::new(m);
    for k in 0..m {
        let s: Vec<f64> = (0..n).map(|i| ((i * 7 + k * 13) as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(i, v)| v * (1.0 + (i % 5) as f64) + 0.01 * ((i + k) as f64).cos())
            .collect();
        memory.push_pair(s, y);
    }
    let g = (0..n).map(|i| (i as f64 * 0.11).cos()).collect();
    (memory, g)
}
