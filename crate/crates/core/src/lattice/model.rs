use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Independent,
    Ising1d,
    Ising2d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Free,
    Periodic,
}

/// Single-site law for the independent baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteDistribution {
    /// Uniform on {-1, +1}.
    TwoPoint,
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl SiteDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            SiteDistribution::TwoPoint => 0.0,
            SiteDistribution::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| v * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            SiteDistribution::TwoPoint => 1.0,
            SiteDistribution::Discrete { values, probs } => {
                let m = self.mean();
                values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum()
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let SiteDistribution::Discrete { values, probs } = self {
            if values.is_empty() || values.len() != probs.len() {
                return Err(Error::InvalidModel("discrete site law needs matching values/probs".into()));
            }
            if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::InvalidModel("discrete site law has invalid entries".into()));
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("site probabilities sum to {total}")));
            }
        }
        Ok(())
    }
}

/// A lattice system together with its sampler controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub site: SiteDistribution,
    /// Nearest-neighbour coupling `J`; must be non-negative.
    pub coupling: f64,
    /// External field `h`.
    pub field: f64,
    pub boundary: Boundary,
    /// Heat-bath sweeps discarded at the start of every chain.
    pub burn_in: usize,
    /// Heat-bath sweeps between retained configurations.
    pub thin: usize,
    /// Number of independent heat-bath chains.
    pub chains: usize,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: ModelKind::Independent,
            site: SiteDistribution::TwoPoint,
            coupling: 0.0,
            field: 0.0,
            boundary: Boundary::Periodic,
            burn_in: 1000,
            thin: 10,
            chains: 8,
        }
    }
}

impl ModelSpec {
    pub fn independent() -> Self {
        Self::default()
    }

    pub fn ising1d(coupling: f64) -> Self {
        Self { kind: ModelKind::Ising1d, coupling, ..Self::default() }
    }

    pub fn ising2d(coupling: f64) -> Self {
        Self { kind: ModelKind::Ising2d, coupling, ..Self::default() }
    }

    pub fn with_field(mut self, field: f64) -> Self {
        self.field = field;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.coupling.is_finite() || !self.field.is_finite() {
            return Err(Error::InvalidModel("coupling and field must be finite".into()));
        }
        if self.coupling < 0.0 {
            return Err(Error::NegativeCoupling(self.coupling));
        }
        if self.chains == 0 {
            return Err(Error::InvalidModel("need at least one chain".into()));
        }
        self.site.validate()
    }

    /// Lattice dimension implied by the model kind, if fixed.
    pub fn dimension(&self) -> Option<usize> {
        match self.kind {
            ModelKind::Independent => None,
            ModelKind::Ising1d => Some(1),
            ModelKind::Ising2d => Some(2),
        }
    }

    /// True when the sampler is exact forward sampling rather than a Markov chain.
    pub fn exact_sampler(&self) -> bool {
        match self.kind {
            ModelKind::Independent => true,
            ModelKind::Ising1d => self.field == 0.0,
            ModelKind::Ising2d => false,
        }
    }
}

/// Where a configuration came from.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub spec: Arc<ModelSpec>,
    pub seed: u64,
    /// Generator stream: configuration index for exact samplers, chain index otherwise.
    pub chain: u64,
}

/// One configuration of a finite lattice, centered to mean zero.
#[derive(Clone, Debug)]
pub struct LatticeSample {
    pub extents: Vec<usize>,
    /// Row-major site values (last axis fastest), raw value minus model mean.
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl LatticeSample {
    pub fn dimension(&self) -> usize {
        self.extents.len()
    }

    pub fn volume(&self) -> usize {
        self.values.len()
    }

    /// Row-major index of a coordinate.
    pub fn index(&self, coord: &[usize]) -> usize {
        coord.iter().zip(&self.extents).fold(0, |acc, (&c, &e)| acc * e + c)
    }
}

/// Axis-aligned box `{origin_i <= y_i < origin_i + extent_i}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub origin: Vec<usize>,
    pub extent: Vec<usize>,
}

impl BoxSpec {
    /// The box anchored at the lattice origin with the given corner.
    pub fn at_origin(corner: Vec<usize>) -> Self {
        Self { origin: vec![0; corner.len()], extent: corner }
    }

    pub fn new(origin: Vec<usize>, extent: Vec<usize>) -> Self {
        Self { origin, extent }
    }

    pub fn volume(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn fits(&self, lattice: &[usize]) -> bool {
        self.origin.len() == lattice.len()
            && self.extent.len() == lattice.len()
            && self.extent.iter().all(|&e| e >= 1)
            && self
                .origin
                .iter()
                .zip(&self.extent)
                .zip(lattice)
                .all(|((&o, &e), &l)| o.checked_add(e).is_some_and(|end| end <= l))
    }

    pub(crate) fn check(&self, lattice: &[usize]) -> Result<()> {
        if self.fits(lattice) {
            Ok(())
        } else {
            Err(Error::BoxOutOfRange {
                origin: self.origin.clone(),
                box_extent: self.extent.clone(),
                lattice: lattice.to_vec(),
            })
        }
    }
}
