#![allow(dead_code)]

use fkgclt::inequalities::JointSmoothedDensity;
use fkgclt::lattice::stream_rng;
use fkgclt::smoothing::SmoothedDensity;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Plain trapezoid rule with `n` intervals; independent of the library quadrature.
pub fn trapezoid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|i| f(lo + h * i as f64)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

pub fn phi(u: f64, var: f64) -> f64 {
    (-0.5 * u * u / var).exp() / (std::f64::consts::TAU * var).sqrt()
}

/// Mixture density and derivative by the textbook formula, no stabilization.
pub fn naive_density(centers: &[f64], tau: f64, u: f64) -> (f64, f64) {
    let n = centers.len() as f64;
    let f = centers.iter().map(|s| phi(u - s, tau)).sum::<f64>() / n;
    let fp = centers.iter().map(|s| -(u - s) / tau * phi(u - s, tau)).sum::<f64>() / n;
    (f, fp)
}

/// Random mixture with 1 to 8 centers in [-3, 3] and bandwidth in [0.2, 2].
pub fn random_mixture(seed: u64) -> SmoothedDensity<f64> {
    let mut rng = stream_rng(seed, 7);
    let k = rng.random_range(1..=8);
    let centers: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let tau = rng.random_range(0.2..2.0);
    SmoothedDensity::new(&centers, tau).unwrap()
}

/// Twenty fixed models: hand-picked shapes followed by seeded random mixtures.
pub fn corpus() -> Vec<SmoothedDensity<f64>> {
    let mut models = vec![
        SmoothedDensity::new(&[0.0], 1.0).unwrap(),
        SmoothedDensity::new(&[-1.0, 1.0], 1.0).unwrap(),
        SmoothedDensity::new(&[-1.0, 1.0], 0.25).unwrap(),
        SmoothedDensity::new(&[-3.0, 0.0, 3.0], 0.5).unwrap(),
        SmoothedDensity::new(&[0.0, 0.0, 0.0, 4.0], 1.0).unwrap(),
        SmoothedDensity::new(&(0..11).map(|i| i as f64 * 0.3 - 1.5).collect::<Vec<_>>(), 0.1).unwrap(),
        SmoothedDensity::new(&[-5.0, 5.0], 0.3).unwrap(),
        SmoothedDensity::new(&[2.0, 2.5], 2.0).unwrap(),
    ];
    models.extend((0..12).map(random_mixture));
    models
}

/// Standard normal draws mapped to `(x, r x + sqrt(1 - r^2) z)`.
pub fn correlated_normal_pairs(n: usize, r: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = stream_rng(seed, 11);
    (0..n)
        .map(|_| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            (x, r * x + (1.0 - r * r).sqrt() * z)
        })
        .collect()
}

/// Joint with up to `max_centers` random pairs sharing a common factor.
pub fn random_joint(seed: u64, max_centers: usize) -> JointSmoothedDensity<f64> {
    let mut rng = stream_rng(seed, 13);
    let n = rng.random_range(2..=max_centers);
    let rho: f64 = rng.random_range(0.0..0.9);
    let tau = rng.random_range(0.3..1.5);
    let pairs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let c: f64 = StandardNormal.sample(&mut rng);
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            (rho.sqrt() * c + (1.0 - rho).sqrt() * a, rho.sqrt() * c + (1.0 - rho).sqrt() * b)
        })
        .collect();
    JointSmoothedDensity::new(&pairs, tau).unwrap()
}

/// Exact covariance of sites at distance `r` on a zero-field periodic ring of length `l`.
pub fn ring_correlation(coupling: f64, l: usize, r: usize) -> f64 {
    let t = coupling.tanh();
    (t.powi(r as i32) + t.powi((l - r) as i32)) / (1.0 + t.powi(l as i32))
}

/// Normalized sums of two adjacent size-`m` boxes on a periodic 1-D Ising ring of length `2 m`.
pub fn ising_pairs(coupling: f64, m: usize, n: usize, seed: u64) -> Vec<(f64, f64)> {
    use fkgclt::lattice::{box_sums, sample_system, BoxSpec, ModelSpec};
    let samples = sample_system(&ModelSpec::ising1d(coupling), &[2 * m], n, seed).unwrap();
    let left = box_sums(&samples, &BoxSpec::new(vec![0], vec![m])).unwrap();
    let right = box_sums(&samples, &BoxSpec::new(vec![m], vec![m])).unwrap();
    left.draws.into_iter().zip(right.draws).collect()
}
