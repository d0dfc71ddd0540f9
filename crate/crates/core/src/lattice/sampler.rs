//! Configuration samplers.
//!
//! The zero-field chain is sampled exactly: a free chain is a two-state Markov
//! chain started from its stationary law, and a periodic ring is sampled as a
//! Markov bridge using closed-form transfer-matrix powers. Everything else
//! (2-D, non-zero field) uses heat-bath sweeps on several independent chains.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::{Boundary, LatticeSample, ModelKind, ModelSpec, Provenance, SiteDistribution};
use crate::error::{Error, Result};

/// Generator for stream `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_extents(spec: &ModelSpec, extents: &[usize], n_samples: usize) -> Result<usize> {
    if extents.is_empty() || extents.len() > 2 || extents.contains(&0) {
        return Err(Error::BadExtents(extents.to_vec()));
    }
    if let Some(d) = spec.dimension() {
        if d != extents.len() {
            return Err(Error::InvalidModel(format!("{:?} needs {d} lattice axes, got {}", spec.kind, extents.len())));
        }
    }
    let volume = extents
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| Error::BadExtents(extents.to_vec()))?;
    volume
        .checked_mul(n_samples.max(1))
        .filter(|&total| total <= isize::MAX as usize / 8)
        .ok_or_else(|| Error::BadExtents(extents.to_vec()))?;
    Ok(volume)
}

/// Draws `n_samples` configurations of `spec` on a lattice with the given extents.
///
/// The output depends only on `(spec, extents, n_samples, seed)`.
pub fn sample_system(spec: &ModelSpec, extents: &[usize], n_samples: usize, seed: u64) -> Result<Vec<LatticeSample>> {
    spec.validate()?;
    let volume = check_extents(spec, extents, n_samples)?;
    let shared = Arc::new(spec.clone());

    let raw: Vec<(u64, Vec<f64>)> = if spec.exact_sampler() {
        (0..n_samples)
            .into_par_iter()
            .map(|k| {
                let mut rng = stream_rng(seed, k as u64);
                let v = match spec.kind {
                    ModelKind::Independent => independent_sites(&spec.site, volume, &mut rng),
                    _ => match spec.boundary {
                        Boundary::Free => free_chain(spec.coupling, volume, &mut rng),
                        Boundary::Periodic => periodic_ring(spec.coupling, volume, &mut rng),
                    },
                };
                (k as u64, v)
            })
            .collect()
    } else {
        heat_bath_samples(spec, extents, n_samples, seed)
    };

    let center = match spec.kind {
        ModelKind::Independent => spec.site.mean(),
        _ if spec.field == 0.0 => 0.0,
        // non-zero field: subtract the empirical grand mean
        _ => {
            let total: f64 = raw.iter().map(|(_, v)| v.iter().sum::<f64>()).sum();
            total / (raw.len().max(1) * volume) as f64
        }
    };

    Ok(raw
        .into_iter()
        .map(|(chain, mut values)| {
            if center != 0.0 {
                values.iter_mut().for_each(|x| *x -= center);
            }
            LatticeSample {
                extents: extents.to_vec(),
                values,
                provenance: Provenance { spec: Arc::clone(&shared), seed, chain },
            }
        })
        .collect())
}

fn independent_sites(site: &SiteDistribution, volume: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match site {
        SiteDistribution::TwoPoint => (0..volume).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect(),
        SiteDistribution::Discrete { values, probs } => (0..volume)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            })
            .collect(),
    }
}

/// Probability that a neighbouring spin agrees in the zero-field chain.
pub fn agreement_probability(coupling: f64) -> f64 {
    // e^J / (e^J + e^-J), written to avoid overflow
    1.0 / (1.0 + (-2.0 * coupling).exp())
}

fn free_chain(coupling: f64, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let same = agreement_probability(coupling);
    let mut out = Vec::with_capacity(len);
    let mut x = if rng.random::<bool>() { 1.0 } else { -1.0 };
    out.push(x);
    for _ in 1..len {
        if rng.random::<f64>() >= same {
            x = -x;
        }
        out.push(x);
    }
    out
}

fn periodic_ring(coupling: f64, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = coupling.tanh();
    let mut out = Vec::with_capacity(len);
    let x0: f64 = if rng.random::<bool>() { 1.0 } else { -1.0 };
    out.push(x0);
    let mut x = x0;
    for i in 0..len.saturating_sub(1) {
        // T^k(b, x0) is proportional to 1 + b*x0*t^k
        let k = (len - 1 - i) as i32;
        let tk = t.powi(k);
        let w_same = coupling.exp() * (1.0 + x * x0 * tk);
        let w_flip = (-coupling).exp() * (1.0 - x * x0 * tk);
        let p_same = w_same / (w_same + w_flip);
        if rng.random::<f64>() >= p_same {
            x = -x;
        }
        out.push(x);
    }
    out
}

const NO_NEIGHBOUR: usize = usize::MAX;

fn neighbours(extents: &[usize], boundary: Boundary) -> Vec<[usize; 4]> {
    let periodic = boundary == Boundary::Periodic;
    let step = |c: usize, len: usize, up: bool| -> Option<usize> {
        if up {
            if c + 1 < len {
                Some(c + 1)
            } else if periodic && len > 1 {
                Some(0)
            } else {
                None
            }
        } else if c > 0 {
            Some(c - 1)
        } else if periodic && len > 1 {
            Some(len - 1)
        } else {
            None
        }
    };
    match *extents {
        [l] => (0..l)
            .map(|i| {
                let mut nb = [NO_NEIGHBOUR; 4];
                nb[0] = step(i, l, false).unwrap_or(NO_NEIGHBOUR);
                nb[1] = step(i, l, true).unwrap_or(NO_NEIGHBOUR);
                nb
            })
            .collect(),
        [lx, ly] => {
            let mut out = Vec::with_capacity(lx * ly);
            for x in 0..lx {
                for y in 0..ly {
                    let mut nb = [NO_NEIGHBOUR; 4];
                    nb[0] = step(x, lx, false).map_or(NO_NEIGHBOUR, |v| v * ly + y);
                    nb[1] = step(x, lx, true).map_or(NO_NEIGHBOUR, |v| v * ly + y);
                    nb[2] = step(y, ly, false).map_or(NO_NEIGHBOUR, |v| x * ly + v);
                    nb[3] = step(y, ly, true).map_or(NO_NEIGHBOUR, |v| x * ly + v);
                    out.push(nb);
                }
            }
            out
        }
        _ => unreachable!("extents validated to 1 or 2 axes"),
    }
}

struct HeatBath {
    neighbours: Vec<[usize; 4]>,
    // P(spin = +1) indexed by neighbour sum + 4
    up_prob: [f64; 9],
    spins: Vec<i8>,
}

impl HeatBath {
    fn new(spec: &ModelSpec, extents: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let neighbours = neighbours(extents, spec.boundary);
        let mut up_prob = [0.0; 9];
        for (i, p) in up_prob.iter_mut().enumerate() {
            let local = spec.coupling * (i as f64 - 4.0) + spec.field;
            *p = 1.0 / (1.0 + (-2.0 * local).exp());
        }
        let spins = (0..neighbours.len()).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        Self { neighbours, up_prob, spins }
    }

    fn sweep(&mut self, rng: &mut ChaCha8Rng) {
        for i in 0..self.spins.len() {
            let m: i32 = self.neighbours[i].iter().filter(|&&j| j != NO_NEIGHBOUR).map(|&j| self.spins[j] as i32).sum();
            let p = self.up_prob[(m + 4) as usize];
            self.spins[i] = if rng.random::<f64>() < p { 1 } else { -1 };
        }
    }
}

fn heat_bath_samples(spec: &ModelSpec, extents: &[usize], n_samples: usize, seed: u64) -> Vec<(u64, Vec<f64>)> {
    let chains = spec.chains.min(n_samples.max(1));
    let per_chain: Vec<Vec<Vec<f64>>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut hb = HeatBath::new(spec, extents, &mut rng);
            for _ in 0..spec.burn_in {
                hb.sweep(&mut rng);
            }
            let count = (n_samples + chains - 1 - c) / chains;
            (0..count)
                .map(|_| {
                    for _ in 0..spec.thin.max(1) {
                        hb.sweep(&mut rng);
                    }
                    hb.spins.iter().map(|&s| s as f64).collect()
                })
                .collect()
        })
        .collect();
    // sample k lives in chain k % chains at position k / chains
    (0..n_samples)
        .map(|k| {
            let c = k % chains;
            (c as u64, per_chain[c][k / chains].clone())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_pair_has_double_bond_weight() {
        // P(same)/P(diff) = e^{4J} for a ring of length 2
        let j = 0.3;
        let mut rng = stream_rng(1, 0);
        let n = 200_000;
        let same = (0..n)
            .filter(|_| {
                let v = periodic_ring(j, 2, &mut rng);
                v[0] == v[1]
            })
            .count() as f64
            / n as f64;
        let expected = (4.0 * j).exp() / (1.0 + (4.0 * j).exp());
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((same - expected).abs() < 4.0 * se, "{same} vs {expected}");
    }

    #[test]
    fn neighbour_tables() {
        let nb = neighbours(&[3], Boundary::Free);
        assert_eq!(nb[0][0], NO_NEIGHBOUR);
        assert_eq!(nb[0][1], 1);
        let nb = neighbours(&[3], Boundary::Periodic);
        assert_eq!(nb[0][0], 2);
        let nb = neighbours(&[2, 3], Boundary::Periodic);
        // site (0,0): up-x is (1,0) = 3, down-y wraps to (0,2) = 2
        assert_eq!(nb[0][1], 3);
        assert_eq!(nb[0][2], 2);
    }

    #[test]
    fn chain_count_covers_all_samples() {
        let spec = ModelSpec { burn_in: 2, thin: 1, chains: 3, ..ModelSpec::ising2d(0.2) };
        let s = heat_bath_samples(&spec, &[4, 4], 7, 9);
        assert_eq!(s.len(), 7);
        assert_eq!(s[4].0, 1);
    }
}
