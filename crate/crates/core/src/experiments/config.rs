//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comments start with '#'
//! model.kind = ising1d
//! model.J = 0.5
//! sweep.sizes = pow2:10
//! output.dir = runs/ising
//! ```
//!
//! Later assignments override earlier ones, so command-line overrides are
//! applied by feeding them through [`ExperimentConfig::set`] after the file.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::infotheory::DeBruijnSpec;
use crate::lattice::{Boundary, ModelKind, ModelSpec, SiteDistribution};
use crate::quadrature::{QuadRule, QuadratureSpec};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "FKGCLT_OUTPUT_DIR";

/// Output directory used when neither the config nor the environment sets one.
pub const DEFAULT_OUTPUT_DIR: &str = "fkgclt-out";

/// Smallest sample count accepted for convergence sweeps.
pub const MIN_SWEEP_SAMPLES: usize = 1000;

#[derive(Clone, Debug, Serialize)]
pub struct SweepSettings {
    pub tau: f64,
    /// Box volumes, strictly increasing.
    pub sizes: Vec<usize>,
    pub samples: usize,
    /// Bootstrap replicates for standard errors.
    pub bootstrap: usize,
    /// Bandwidths for the kappa table.
    pub kappa_taus: Vec<f64>,
    /// Radius of the covariance profile behind the susceptibility estimate.
    pub cov_radius: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditSettings {
    /// Box volume pairs `(m, n)` with `m >= n`.
    pub pairs: Vec<(usize, usize)>,
    pub samples: usize,
    pub epsilon: f64,
    /// Minimum 2-D quadrature nodes per axis.
    pub nodes: usize,
    pub bootstrap: usize,
    /// Strip width for 2-D lattices.
    pub width: usize,
    /// Region parameter for the factorization audit; defaults to `(K / Cov)^{1/6}`.
    pub b: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputSettings {
    pub dir: Option<PathBuf>,
    /// Record wall-clock times; off by default so outputs are reproducible.
    pub timing: bool,
    /// Write the box sums behind every sweep record.
    pub dump_samples: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Lattice extents; derived from the schedule when absent.
    pub extents: Option<Vec<usize>>,
    pub seed: u64,
    pub sweep: SweepSettings,
    pub audit: AuditSettings,
    pub quad: QuadratureSpec<f64>,
    pub debruijn: DeBruijnSpec<f64>,
    pub output: OutputSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            extents: None,
            seed: 1,
            sweep: SweepSettings {
                tau: 1.0,
                sizes: pow2(10),
                samples: 10_000,
                bootstrap: 100,
                kappa_taus: vec![0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
                cov_radius: None,
            },
            audit: AuditSettings {
                pairs: (0..=6).map(|k| (1 << k, 1 << k)).collect(),
                samples: 10_000,
                epsilon: 0.05,
                nodes: 256,
                bootstrap: 100,
                width: 8,
                b: None,
            },
            quad: QuadratureSpec::default(),
            debruijn: DeBruijnSpec::default(),
            output: OutputSettings { dir: None, timing: false, dump_samples: false },
        }
    }
}

fn pow2(k: u32) -> Vec<usize> {
    (0..=k).map(|i| 1usize << i).collect()
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key} = {value}: {why}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(bad(key, value, "expected a boolean")),
    }
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split([',', 'x']).map(str::trim).filter(|s| !s.is_empty()).map(|s| num(key, s)).collect()
}

fn sizes(key: &str, value: &str) -> Result<Vec<usize>> {
    let v = match value.strip_prefix("pow2:") {
        Some(k) => pow2(num(key, k)?),
        None => list(key, value)?,
    };
    if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad(key, value, "sizes must be positive and strictly increasing"));
    }
    Ok(v)
}

fn pairs(key: &str, value: &str) -> Result<Vec<(usize, usize)>> {
    if let Some(k) = value.strip_prefix("ladder:") {
        return Ok(pow2(num(key, k)?).into_iter().map(|m| (m, m)).collect());
    }
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|p| {
            let (m, n) = p.split_once(':').ok_or_else(|| bad(key, value, "pairs are written m:n"))?;
            let (m, n): (usize, usize) = (num(key, m.trim())?, num(key, n.trim())?);
            if n == 0 || m < n {
                return Err(bad(key, value, "need m >= n >= 1"));
            }
            Ok((m, n))
        })
        .collect()
}

fn site(key: &str, value: &str) -> Result<SiteDistribution> {
    if value == "two_point" {
        return Ok(SiteDistribution::TwoPoint);
    }
    let mut values = Vec::new();
    let mut probs = Vec::new();
    for atom in value.split(',') {
        let (v, p) = atom.split_once(':').ok_or_else(|| bad(key, value, "expected two_point or v:p,v:p,..."))?;
        values.push(num(key, v.trim())?);
        probs.push(num(key, p.trim())?);
    }
    Ok(SiteDistribution::Discrete { values, probs })
}

impl ExperimentConfig {
    /// Reads a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Applies every `key = value` line of `text`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies an override written as `key=value`.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model.kind" => {
                self.model.kind = match value {
                    "independent" => ModelKind::Independent,
                    "ising1d" => ModelKind::Ising1d,
                    "ising2d" => ModelKind::Ising2d,
                    _ => return Err(bad(key, value, "expected independent, ising1d or ising2d")),
                }
            }
            "model.J" => self.model.coupling = num(key, value)?,
            "model.h" => self.model.field = num(key, value)?,
            "model.boundary" => {
                self.model.boundary = match value {
                    "periodic" => Boundary::Periodic,
                    "free" => Boundary::Free,
                    _ => return Err(bad(key, value, "expected periodic or free")),
                }
            }
            "model.site" => self.model.site = site(key, value)?,
            "model.extents" => self.extents = Some(list(key, value)?),
            "model.burn_in" => self.model.burn_in = num(key, value)?,
            "model.thin" => self.model.thin = num(key, value)?,
            "model.chains" => self.model.chains = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "sweep.tau" => self.sweep.tau = num(key, value)?,
            "sweep.sizes" => self.sweep.sizes = sizes(key, value)?,
            "sweep.samples" => self.sweep.samples = num(key, value)?,
            "sweep.bootstrap" => self.sweep.bootstrap = num(key, value)?,
            "sweep.kappa_taus" => self.sweep.kappa_taus = list(key, value)?,
            "sweep.cov_radius" => self.sweep.cov_radius = Some(num(key, value)?),
            "audit.pairs" => self.audit.pairs = pairs(key, value)?,
            "audit.samples" => self.audit.samples = num(key, value)?,
            "audit.epsilon" => self.audit.epsilon = num(key, value)?,
            "audit.nodes" => self.audit.nodes = num(key, value)?,
            "audit.bootstrap" => self.audit.bootstrap = num(key, value)?,
            "audit.width" => self.audit.width = num(key, value)?,
            "audit.B" => self.audit.b = Some(num(key, value)?),
            "quad.rule" => {
                self.quad.rule = match value {
                    "adaptive" => QuadRule::Adaptive,
                    "fixed" => QuadRule::FixedPanels,
                    _ => return Err(bad(key, value, "expected adaptive or fixed")),
                }
            }
            "quad.nodes" => self.quad.nodes = num(key, value)?,
            "quad.panel_order" => self.quad.panel_order = num(key, value)?,
            "quad.half_width" => self.quad.half_width = num(key, value)?,
            "quad.abs_tol" => self.quad.abs_tol = num(key, value)?,
            "quad.rel_tol" => self.quad.rel_tol = num(key, value)?,
            "debruijn.points" => self.debruijn.points = num(key, value)?,
            "debruijn.s_min" => self.debruijn.s_min = num(key, value)?,
            "debruijn.t_max" => self.debruijn.t_max = num(key, value)?,
            "output.dir" => self.output.dir = Some(PathBuf::from(value)),
            "output.timing" => self.output.timing = boolean(key, value)?,
            "output.dump_samples" => self.output.dump_samples = boolean(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks everything that does not depend on the run mode.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.quad.validate()?;
        self.debruijn.validate()?;
        if !(self.sweep.tau > 0.0 && self.sweep.tau.is_finite()) {
            return Err(Error::BadBandwidth(self.sweep.tau));
        }
        if let Some(&t) = self.sweep.kappa_taus.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::BadBandwidth(t));
        }
        if self.sweep.kappa_taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sweep.kappa_taus must be strictly increasing".into()));
        }
        if !(self.audit.epsilon > 0.0 && self.audit.epsilon < 1.0 / 3.0) {
            return Err(Error::Config(format!("audit.epsilon = {} must lie in (0, 1/3)", self.audit.epsilon)));
        }
        Ok(())
    }

    /// Lattice dimension: fixed by Ising kinds, otherwise taken from the extents.
    pub fn dimension(&self) -> usize {
        self.model.dimension().or_else(|| self.extents.as_ref().map(Vec::len)).unwrap_or(1)
    }

    /// Output directory: config, then environment, then the built-in default.
    pub fn output_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_namespaced_keys() {
        let mut c = ExperimentConfig::default();
        c.apply_text(
            "# ising run\nmodel.kind = ising1d\nmodel.J = 0.5\nsweep.sizes = pow2:3\nmodel.extents = 64x64\n\naudit.pairs = 4:2, 8:8\n",
        )
        .unwrap();
        assert_eq!(c.model.kind, ModelKind::Ising1d);
        assert_eq!(c.model.coupling, 0.5);
        assert_eq!(c.sweep.sizes, vec![1, 2, 4, 8]);
        assert_eq!(c.extents, Some(vec![64, 64]));
        assert_eq!(c.audit.pairs, vec![(4, 2), (8, 8)]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::default();
        assert!(c.set("sweep.sizes", "4,2").is_err());
        assert!(c.set("audit.pairs", "2:4").is_err());
        assert!(c.set("model.colour", "red").is_err());
        assert!(c.apply_text("no equals sign").is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = ExperimentConfig::default();
        c.apply_text("seed = 3").unwrap();
        c.apply_override("seed=9").unwrap();
        assert_eq!(c.seed, 9);
    }
}
