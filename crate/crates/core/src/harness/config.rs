use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::lbfgs::WolfeParams;
use crate::mp::{MpConfig, Strategy};

/// A training run, read from `key = value` lines with `#` comments.
///
/// `seed` is mandatory; every other key has a default. Unknown keys are
/// rejected. Paths are taken as written (relative to the working
/// directory).
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    /// Subdomains per axis, written `4x2`.
    pub subdomains: Vec<usize>,
    pub overlap_ratio: f64,
    pub width: usize,
    pub blocks: usize,
    pub points: usize,
    pub eta: usize,
    pub strategy: Strategy,
    pub beta0: f64,
    pub memory: usize,
    pub k_max: usize,
    pub newton_iters: usize,
    pub seed: u64,
    /// Validation grid per axis (one value for Poisson, `nt x nx` for
    /// Burgers).
    pub validation: Vec<usize>,
    pub output_csv: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub threads: usize,
    pub safeguard: bool,
    /// Write measured wall time; `false` writes zeros for byte-identical
    /// traces.
    pub wall_clock: bool,
    pub wolfe: WolfeParams,
}

impl ExperimentConfig {
    /// Defaults for a problem; `seed` still has to be set explicitly when
    /// parsing.
    pub fn defaults(problem: &str) -> Self {
        let (subdomains, points, validation) = match problem {
            "poisson2d" => (vec![4, 4], 20_000, vec![128]),
            "burgers" => (vec![4, 2], 5_000, vec![101, 201]),
            _ => (vec![20], 3_000, vec![512]),
        };
        Self {
            problem: problem.to_string(),
            subdomains,
            overlap_ratio: 0.4,
            width: 20,
            blocks: 2,
            points,
            eta: 5,
            strategy: Strategy::Spm,
            beta0: 1.0,
            memory: 10,
            k_max: 200,
            newton_iters: 3,
            seed: 0,
            validation,
            output_csv: None,
            checkpoint: None,
            threads: 1,
            safeguard: true,
            wall_clock: true,
            wolfe: WolfeParams::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if pairs.iter().any(|(p, _): &(&str, &str)| *p == k) {
                return Err(Error::InvalidConfig(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            pairs.push((k, v));
        }
        let problem = pairs
            .iter()
            .find(|(k, _)| *k == "problem")
            .map_or("poisson1d", |(_, v)| *v);
        let mut cfg = Self::defaults(problem);
        let mut seen_seed = false;
        for (k, v) in pairs {
            match k {
                "problem" => cfg.problem = v.to_string(),
                "subdomains" => cfg.subdomains = parse_dims(k, v)?,
                "overlap_ratio" => cfg.overlap_ratio = num(k, v)?,
                "width" => cfg.width = num(k, v)?,
                "blocks" => cfg.blocks = num(k, v)?,
                "points" => cfg.points = num(k, v)?,
                "eta" => cfg.eta = num(k, v)?,
                "strategy" => cfg.strategy = v.parse()?,
                "beta0" => cfg.beta0 = num(k, v)?,
                "memory" => cfg.memory = num(k, v)?,
                "k_max" => cfg.k_max = num(k, v)?,
                "newton_iters" => cfg.newton_iters = num(k, v)?,
                "seed" => {
                    cfg.seed = num(k, v)?;
                    seen_seed = true;
                }
                "validation" => cfg.validation = parse_dims(k, v)?,
                "output_csv" => cfg.output_csv = Some(PathBuf::from(v)),
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(v)),
                "threads" => cfg.threads = num(k, v)?,
                "safeguard" => cfg.safeguard = num(k, v)?,
                "wall_clock" => cfg.wall_clock = num(k, v)?,
                "wolfe_c1" => cfg.wolfe.c1 = num(k, v)?,
                "wolfe_c2" => cfg.wolfe.c2 = num(k, v)?,
                "ls_max_iters" => cfg.wolfe.max_iters = num(k, v)?,
                "local_loss_mode" if v == "isolated" => {}
                "local_loss_mode" => {
                    return Err(Error::InvalidConfig(format!("local_loss_mode '{v}' not supported")))
                }
                _ => return Err(Error::InvalidConfig(format!("unknown key '{k}'"))),
            }
        }
        if !seen_seed {
            return Err(Error::InvalidConfig("missing required key 'seed'".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !matches!(self.problem.as_str(), "poisson1d" | "poisson2d" | "burgers") {
            return bad(&format!("unknown problem '{}'", self.problem));
        }
        if self.subdomains.is_empty() || self.subdomains.contains(&0) {
            return bad("subdomain counts must be positive");
        }
        if self.width == 0 || self.points == 0 || self.memory == 0 || self.threads == 0 {
            return bad("width, points, memory and threads must be positive");
        }
        if self.validation.is_empty() || self.validation.iter().any(|&n| n < 2) {
            return bad("validation grids need at least 2 points per axis");
        }
        self.mp().validate()
    }

    pub fn mp(&self) -> MpConfig {
        MpConfig {
            strategy: self.strategy,
            eta: self.eta,
            beta0: self.beta0,
            memory: self.memory,
            k_max: self.k_max,
            newton_iters: self.newton_iters,
            wolfe: self.wolfe,
            threads: self.threads,
            safeguard: self.safeguard,
            record_iterates: false,
        }
    }
}

fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("invalid value '{v}' for '{k}'")))
}

fn parse_dims(k: &str, v: &str) -> Result<Vec<usize>> {
    v.split(['x', 'X', '×']).map(|p| num(k, p.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = "# comment\nproblem = burgers\nsubdomains = 4x2\nseed = 7  # trailing\nstrategy = lss\n\
                    eta = 3\nk_max = 0\nthreads = 2\nsafeguard = false\nvalidation = 11x21\n";
        let c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.problem, "burgers");
        assert_eq!(c.subdomains, vec![4, 2]);
        assert_eq!(c.seed, 7);
        assert_eq!(c.strategy, Strategy::Lss);
        assert_eq!(c.points, 5000);
        assert!(!c.safeguard);
        assert_eq!(c.validation, vec![11, 21]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::parse("problem = poisson1d\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\ncolour = red\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nseed = 2\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nstrategy = sgd\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nwidth = 0\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nwolfe_c1 = 0.95\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nlocal_loss_mode = coupled\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nno equals sign\n").is_err());
        assert!(ExperimentConfig::parse("seed = 1\nlocal_loss_mode = isolated\n").is_ok());
    }
}
