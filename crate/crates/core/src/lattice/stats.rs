//! Box sums, covariance profiles and quadrant-dependence estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{Boundary, BoxSpec, LatticeSample};
use crate::error::{Error, Result};

/// Normalized box sums `U_x = sum_{u in B_x} X_u / sqrt(|x|)`, one per configuration.
#[derive(Clone, Debug, Serialize)]
pub struct SampleSet {
    pub draws: Vec<f64>,
    /// Box volume `|x|`.
    pub volume: usize,
    pub mean: f64,
    /// Unbiased sample variance of the draws.
    pub variance: f64,
    /// `v(x)`: variance of the unnormalized sum divided by `|x|`, which is `variance` itself.
    pub susceptibility: f64,
}

impl SampleSet {
    /// Wraps raw draws (for instance a CSV column) as a sample set of box volume `volume`.
    pub fn from_draws(draws: Vec<f64>, volume: usize) -> Result<Self> {
        if draws.len() < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: draws.len() });
        }
        if let Some(bad) = draws.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinitePoint(*bad));
        }
        let (mean, variance) = mean_var(&draws);
        Ok(Self { draws, volume: volume.max(1), mean, variance, susceptibility: variance })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1.0))
}

/// Unbiased sample covariance with the standard error `sd((a - a_bar)(b - b_bar)) / sqrt(N)`.
pub fn sample_covariance(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return (0.0, f64::INFINITY);
    }
    let (ma, _) = mean_var(a);
    let (mb, _) = mean_var(b);
    let z: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let cov = z.iter().sum::<f64>() / (n as f64 - 1.0);
    let (_, vz) = mean_var(&z);
    (cov, (vz / n as f64).sqrt())
}

fn box_total(sample: &LatticeSample, b: &BoxSpec) -> f64 {
    match sample.extents.as_slice() {
        [_] => sample.values[b.origin[0]..b.origin[0] + b.extent[0]].iter().sum(),
        [_, ly] => (b.origin[0]..b.origin[0] + b.extent[0])
            .map(|x| {
                let start = x * ly + b.origin[1];
                sample.values[start..start + b.extent[1]].iter().sum::<f64>()
            })
            .sum(),
        _ => unreachable!("lattices have one or two axes"),
    }
}

/// Forms one normalized box sum per configuration.
pub fn box_sums(samples: &[LatticeSample], b: &BoxSpec) -> Result<SampleSet> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    for s in samples {
        b.check(&s.extents)?;
    }
    let norm = (b.volume() as f64).sqrt();
    let draws: Vec<f64> = samples.par_iter().map(|s| box_total(s, b) / norm).collect();
    SampleSet::from_draws(draws, b.volume())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovEstimator {
    /// Sample covariance across configurations at a fixed origin.
    #[default]
    AcrossConfigurations,
    /// Average over all admissible origins inside each configuration, then across configurations.
    SpatialAverage,
}

#[derive(Clone, Debug, Serialize)]
pub struct SlowVariation {
    pub radius: usize,
    /// `K(2R)/K(R)` when `2R` is within the profile.
    pub ratio_2: Option<f64>,
    /// `K(4R)/K(R)` when `4R` is within the profile.
    pub ratio_4: Option<f64>,
}

/// Covariances `Cov(X_0, X_u)` for `|u|_inf <= R` and their partial sums.
#[derive(Clone, Debug, Serialize)]
pub struct CovarianceProfile {
    pub estimator: CovEstimator,
    /// Reference site for the across-configuration estimator.
    pub origin: Vec<usize>,
    pub offsets: Vec<Vec<isize>>,
    pub covariance: Vec<f64>,
    pub covariance_se: Vec<f64>,
    /// `K(R)` for `R = 0..=max_radius` (sup-norm balls).
    pub partial_sums: Vec<f64>,
    pub partial_sums_se: Vec<f64>,
    pub susceptibility: f64,
    pub susceptibility_se: f64,
    pub truncation_radius: usize,
    pub slow_variation: Vec<SlowVariation>,
}

impl CovarianceProfile {
    /// Estimate and standard error at `offset`, if it is part of the profile.
    pub fn at(&self, offset: &[isize]) -> Option<(f64, f64)> {
        self.offsets.iter().position(|o| o.as_slice() == offset).map(|i| (self.covariance[i], self.covariance_se[i]))
    }
}

fn offsets_within(dim: usize, radius: usize) -> Vec<Vec<isize>> {
    let r = radius as isize;
    match dim {
        1 => (-r..=r).map(|u| vec![u]).collect(),
        _ => (-r..=r).flat_map(|x| (-r..=r).map(move |y| vec![x, y])).collect(),
    }
}

fn sup_norm(u: &[isize]) -> usize {
    u.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0)
}

/// Site index of `base + offset`, wrapping on periodic lattices.
fn shifted(extents: &[usize], base: &[usize], offset: &[isize], periodic: bool) -> Option<usize> {
    let mut idx = 0usize;
    for ((&e, &b), &o) in extents.iter().zip(base).zip(offset) {
        let c = b as isize + o;
        let c = if periodic {
            c.rem_euclid(e as isize)
        } else if c < 0 || c >= e as isize {
            return None;
        } else {
            c
        };
        idx = idx * e + c as usize;
    }
    Some(idx)
}

fn unravel(extents: &[usize], mut idx: usize) -> Vec<usize> {
    let mut out = vec![0; extents.len()];
    for (slot, &e) in out.iter_mut().zip(extents).rev() {
        *slot = idx % e;
        idx /= e;
    }
    out
}

/// Estimates the covariance profile up to sup-norm radius `max_radius`.
pub fn covariance_profile(
    samples: &[LatticeSample],
    max_radius: usize,
    estimator: CovEstimator,
) -> Result<CovarianceProfile> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: samples.len() });
    }
    let extents = samples[0].extents.clone();
    if samples.iter().any(|s| s.extents != extents) {
        return Err(Error::InvalidArgument("samples have differing extents".into()));
    }
    let periodic = samples[0].provenance.spec.boundary == Boundary::Periodic;
    let too_large = || Error::RadiusTooLarge { radius: max_radius, lattice: extents.clone() };
    let origin: Vec<usize> = if periodic {
        if extents.iter().any(|&e| 2 * max_radius >= e) {
            return Err(too_large());
        }
        vec![0; extents.len()]
    } else {
        let o: Vec<usize> = extents.iter().map(|&e| e / 2).collect();
        if o.iter().zip(&extents).any(|(&c, &e)| c < max_radius || c + max_radius >= e) {
            return Err(too_large());
        }
        o
    };

    let offsets = offsets_within(extents.len(), max_radius);
    let radii: Vec<usize> = offsets.iter().map(|u| sup_norm(u)).collect();
    let n = samples.len();
    let volume: usize = extents.iter().product();

    // per configuration: one statistic per offset whose average estimates the covariance
    let per_config: Vec<Vec<f64>> = match estimator {
        CovEstimator::AcrossConfigurations => {
            let base = shifted(&extents, &origin, &vec![0; extents.len()], periodic).unwrap();
            let a: Vec<f64> = samples.iter().map(|s| s.values[base]).collect();
            let (ma, _) = mean_var(&a);
            let idx: Vec<usize> = offsets.iter().map(|u| shifted(&extents, &origin, u, periodic).unwrap()).collect();
            let means: Vec<f64> =
                idx.iter().map(|&j| samples.iter().map(|s| s.values[j]).sum::<f64>() / n as f64).collect();
            // (n / (n-1)) makes the average of these the unbiased covariance
            let scale = n as f64 / (n as f64 - 1.0);
            samples
                .par_iter()
                .zip(a.par_iter())
                .map(|(s, &x0)| idx.iter().zip(&means).map(|(&j, &m)| scale * (x0 - ma) * (s.values[j] - m)).collect())
                .collect()
        }
        CovEstimator::SpatialAverage => {
            let grand = samples.iter().map(|s| s.values.iter().sum::<f64>()).sum::<f64>() / (n * volume) as f64;
            samples
                .par_iter()
                .map(|s| {
                    offsets
                        .iter()
                        .map(|u| {
                            let mut acc = 0.0;
                            let mut count = 0usize;
                            for i in 0..volume {
                                let c = unravel(&extents, i);
                                if let Some(j) = shifted(&extents, &c, u, periodic) {
                                    acc += (s.values[i] - grand) * (s.values[j] - grand);
                                    count += 1;
                                }
                            }
                            acc / count.max(1) as f64
                        })
                        .collect()
                })
                .collect()
        }
    };

    let column_stats = |col: &dyn Fn(&Vec<f64>) -> f64| -> (f64, f64) {
        let z: Vec<f64> = per_config.iter().map(col).collect();
        let (m, v) = mean_var(&z);
        (m, (v / n as f64).sqrt())
    };

    let mut covariance = Vec::with_capacity(offsets.len());
    let mut covariance_se = Vec::with_capacity(offsets.len());
    for i in 0..offsets.len() {
        let (m, se) = column_stats(&|row| row[i]);
        covariance.push(m);
        covariance_se.push(se);
    }
    let mut partial_sums = Vec::with_capacity(max_radius + 1);
    let mut partial_sums_se = Vec::with_capacity(max_radius + 1);
    for r in 0..=max_radius {
        let (m, se) = column_stats(&|row| row.iter().zip(&radii).filter(|(_, &rad)| rad <= r).map(|(v, _)| v).sum());
        partial_sums.push(m);
        partial_sums_se.push(se);
    }
    let slow_variation = (1..=max_radius)
        .map(|r| SlowVariation {
            radius: r,
            ratio_2: (2 * r <= max_radius).then(|| partial_sums[2 * r] / partial_sums[r]),
            ratio_4: (4 * r <= max_radius).then(|| partial_sums[4 * r] / partial_sums[r]),
        })
        .collect();

    Ok(CovarianceProfile {
        estimator,
        origin,
        offsets,
        covariance,
        covariance_se,
        susceptibility: partial_sums[max_radius],
        susceptibility_se: partial_sums_se[max_radius],
        partial_sums,
        partial_sums_se,
        truncation_radius: max_radius,
        slow_variation,
    })
}

/// Smooth increasing test functions for the covariance comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "scale")]
pub enum TestFunction {
    Tanh(f64),
    Arctan(f64),
    Logistic(f64),
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Tanh(s) => (s * x).tanh(),
            TestFunction::Arctan(s) => (s * x).atan(),
            TestFunction::Logistic(s) => 1.0 / (1.0 + (-s * x).exp()),
        }
    }

    /// `sup |f'|`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            TestFunction::Tanh(s) | TestFunction::Arctan(s) => s.abs(),
            TestFunction::Logistic(s) => s.abs() / 4.0,
        }
    }

    pub fn default_family() -> Vec<TestFunction> {
        vec![TestFunction::Tanh(1.0), TestFunction::Arctan(0.5), TestFunction::Logistic(2.0)]
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TestFunctionCheck {
    pub f: TestFunction,
    pub g: TestFunction,
    /// `Cov(f(S), g(T))`.
    pub lhs: f64,
    /// `|f'| |g'| Cov(S, T)`.
    pub rhs: f64,
    /// Combined standard error of `rhs - lhs`.
    pub se: f64,
    pub holds: bool,
}

/// Evaluation grid for `H(s, t)`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadrantGrid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

impl QuadrantGrid {
    /// `k` interior empirical quantiles of each coordinate (levels `i/(k+1)`).
    pub fn quantiles(pairs: &[(f64, f64)], k: usize) -> Self {
        let q = |mut v: Vec<f64>| -> Vec<f64> {
            v.sort_by(f64::total_cmp);
            let mut out: Vec<f64> = (1..=k).map(|i| v[(i * v.len() / (k + 1)).min(v.len() - 1)]).collect();
            out.dedup();
            out
        };
        Self { s: q(pairs.iter().map(|p| p.0).collect()), t: q(pairs.iter().map(|p| p.1).collect()) }
    }

    /// `k` equally spaced points strictly inside the empirical range.
    pub fn uniform(pairs: &[(f64, f64)], k: usize) -> Self {
        let u = |v: Vec<f64>| -> Vec<f64> {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (1..=k).map(|i| lo + (hi - lo) * i as f64 / (k + 1) as f64).collect()
        };
        Self { s: u(pairs.iter().map(|p| p.0).collect()), t: u(pairs.iter().map(|p| p.1).collect()) }
    }
}

/// Empirical quadrant dependence `H(s,t) = P(S>=s, T>=t) - P(S>=s) P(T>=t)`.
#[derive(Clone, Debug, Serialize)]
pub struct QuadrantReport {
    pub pairs: usize,
    pub grid: QuadrantGrid,
    /// Row-major over `(s, t)`.
    pub h: Vec<f64>,
    pub se: Vec<f64>,
    pub min: f64,
    pub min_se: f64,
    pub argmin: (f64, f64),
    /// Smallest `H / SE` over grid points with positive standard error.
    pub min_z: f64,
    pub cov: f64,
    pub cov_se: f64,
    pub tests: Vec<TestFunctionCheck>,
}

fn count_at_least(grid: &[f64], x: f64) -> usize {
    // number of grid levels g with x >= g (grid is sorted ascending)
    grid.partition_point(|&g| g <= x)
}

/// Evaluates `H` on `grid` together with the test-function covariance comparison.
pub fn quadrant_dependence(
    pairs: &[(f64, f64)],
    grid: &QuadrantGrid,
    family: &[TestFunction],
) -> Result<QuadrantReport> {
    if pairs.len() < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: pairs.len() });
    }
    if grid.s.is_empty() || grid.t.is_empty() {
        return Err(Error::InvalidArgument("empty quadrant grid".into()));
    }
    let mut gs = grid.s.clone();
    let mut gt = grid.t.clone();
    gs.sort_by(f64::total_cmp);
    gt.sort_by(f64::total_cmp);
    let (ns, nt) = (gs.len(), gt.len());

    // hist[a][b]: pairs with exactly a s-levels and b t-levels at or below them
    let mut hist = vec![0u64; (ns + 1) * (nt + 1)];
    for &(s, t) in pairs {
        hist[count_at_least(&gs, s) * (nt + 1) + count_at_least(&gt, t)] += 1;
    }
    // suffix sums: joint[i][j] = #{S >= s_i, T >= t_j} = #{a > i, b > j}
    let mut suffix = vec![0u64; (ns + 2) * (nt + 2)];
    for a in (0..=ns).rev() {
        for b in (0..=nt).rev() {
            suffix[a * (nt + 2) + b] =
                hist[a * (nt + 1) + b] + suffix[(a + 1) * (nt + 2) + b] + suffix[a * (nt + 2) + b + 1]
                    - suffix[(a + 1) * (nt + 2) + b + 1];
        }
    }
    let total = pairs.len() as f64;
    let mut h = Vec::with_capacity(ns * nt);
    let mut se = Vec::with_capacity(ns * nt);
    for i in 0..ns {
        for j in 0..nt {
            let p11 = suffix[(i + 1) * (nt + 2) + j + 1] as f64 / total;
            let pa = suffix[(i + 1) * (nt + 2)] as f64 / total;
            let pb = suffix[j + 1] as f64 / total;
            let (p10, p01) = (pa - p11, pb - p11);
            let p00 = 1.0 - pa - pb + p11;
            let (qa, qb) = (1.0 - pa, 1.0 - pb);
            if qa * qb * pa * pb == 0.0 {
                // a constant indicator: H vanishes identically
                h.push(0.0);
                se.push(0.0);
                continue;
            }
            let hv = p11 - pa * pb;
            let ez2 =
                qa * qa * qb * qb * p11 + qa * qa * pb * pb * p10 + pa * pa * qb * qb * p01 + pa * pa * pb * pb * p00;
            h.push(hv);
            se.push(((ez2 - hv * hv).max(0.0) / total).sqrt());
        }
    }
    let (k, &min) = h.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let min_z = h.iter().zip(&se).filter(|(_, &e)| e > 0.0).map(|(v, e)| v / e).fold(f64::INFINITY, f64::min);

    let s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let t: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let (cov, cov_se) = sample_covariance(&s, &t);
    let tests = family
        .iter()
        .flat_map(|f| family.iter().map(move |g| (*f, *g)))
        .map(|(f, g)| {
            let fs: Vec<f64> = s.iter().map(|&x| f.eval(x)).collect();
            let gt: Vec<f64> = t.iter().map(|&x| g.eval(x)).collect();
            let (lhs, lhs_se) = sample_covariance(&fs, &gt);
            let lip = f.lipschitz() * g.lipschitz();
            let rhs = lip * cov;
            let se = lhs_se + lip * cov_se;
            TestFunctionCheck { f, g, lhs, rhs, se, holds: lhs <= rhs + 3.0 * se }
        })
        .collect();

    Ok(QuadrantReport {
        pairs: pairs.len(),
        argmin: (gs[k / nt], gt[k % nt]),
        min_se: se[k],
        grid: QuadrantGrid { s: gs, t: gt },
        h,
        se,
        min,
        min_z,
        cov,
        cov_se,
        tests,
    })
}
