mod common;

use std::collections::HashMap;

use common::ring_correlation;
use fkgclt::lattice::{
    box_sums, covariance_profile, mean_var, quadrant_dependence, sample_covariance, sample_system, Boundary, BoxSpec,
    CovEstimator, LatticeSample, ModelSpec, QuadrantGrid, TestFunction,
};
use fkgclt::Error;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn site_column(samples: &[LatticeSample], i: usize) -> Vec<f64> {
    samples.iter().map(|s| s.values[i]).collect()
}

fn boltzmann(coupling: f64, l: usize, periodic: bool) -> Vec<f64> {
    let bonds = if periodic { l } else { l - 1 };
    let weights: Vec<f64> = (0..1usize << l)
        .map(|state| {
            let spin = |i: usize| if state >> (i % l) & 1 == 1 { 1.0 } else { -1.0 };
            let energy: f64 = (0..bonds).map(|i| spin(i) * spin(i + 1)).sum();
            (coupling * energy).exp()
        })
        .collect();
    let z: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / z).collect()
}

fn encode(values: &[f64]) -> usize {
    values.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| 1 << i).sum()
}

/// Pearson statistic with cells of expected count below 5 pooled, and its 1% critical value.
fn chi_square(counts: &HashMap<usize, usize>, probs: &[f64], draws: usize) -> (f64, f64) {
    let mut cells: Vec<(f64, f64)> =
        probs.iter().enumerate().map(|(s, p)| (p * draws as f64, *counts.get(&s).unwrap_or(&0) as f64)).collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (e, o) in cells {
        if pool.0 < 5.0 {
            pool = (pool.0 + e, pool.1 + o);
        } else {
            bins.push((e, o));
        }
    }
    bins.push(pool);
    let stat: f64 = bins.iter().map(|(e, o)| (o - e) * (o - e) / e).sum();
    let critical = ChiSquared::new((bins.len() - 1) as f64).unwrap().inverse_cdf(0.99);
    (stat, critical)
}

#[test]
fn exact_chain_matches_boltzmann_enumeration() {
    let draws = 100_000;
    for (coupling, l, boundary) in
        [(0.5, 8, Boundary::Periodic), (0.5, 6, Boundary::Free), (0.3, 12, Boundary::Periodic)]
    {
        let spec = ModelSpec::ising1d(coupling).with_boundary(boundary);
        let samples = sample_system(&spec, &[l], draws, 42).unwrap();
        let mut counts = HashMap::new();
        for s in &samples {
            *counts.entry(encode(&s.values)).or_insert(0) += 1;
        }
        let probs = boltzmann(coupling, l, boundary == Boundary::Periodic);
        let (stat, critical) = chi_square(&counts, &probs, draws);
        assert!(stat < critical, "J={coupling} L={l} {boundary:?}: chi2 {stat} >= {critical}");
    }
}

#[test]
fn ring_correlation_closed_form_matches_enumeration() {
    for l in [3, 7, 12] {
        let probs = boltzmann(0.5, l, true);
        for r in 1..l {
            let exact: f64 =
                probs.iter().enumerate().map(|(s, p)| if (s & 1) == ((s >> r) & 1) { *p } else { -*p }).sum();
            assert!((exact - ring_correlation(0.5, l, r)).abs() < 1e-12, "L={l} r={r}");
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    for spec in [
        ModelSpec::ising1d(0.5),
        ModelSpec::ising2d(0.2),
        ModelSpec::independent(),
        ModelSpec::ising1d(0.4).with_field(0.2),
    ] {
        let extents = if spec.dimension() == Some(2) { vec![6, 6] } else { vec![16] };
        let a = sample_system(&spec, &extents, 50, 9).unwrap();
        let b = sample_system(&spec, &extents, 50, 9).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values, y.values);
            assert_eq!(x.provenance.chain, y.provenance.chain);
        }
        let c = sample_system(&spec, &extents, 50, 10).unwrap();
        assert!(a.iter().zip(&c).any(|(x, y)| x.values != y.values));
    }
}

#[test]
fn independent_sites_have_unit_variance() {
    let samples = sample_system(&ModelSpec::independent(), &[32], 20_000, 3).unwrap();
    for i in [0, 7, 31] {
        let col = site_column(&samples, i);
        let (m, v) = mean_var(&col);
        let n = col.len() as f64;
        assert!(m.abs() < 3.0 * (v / n).sqrt(), "site {i} mean {m}");
        // +-1 sites: the sample variance is 1 - m^2 up to O(1/n)
        assert!((v - 1.0).abs() < 3.0 * (v / n).sqrt() + 1e-3, "site {i} variance {v}");
    }
}

#[test]
fn zero_coupling_is_indistinguishable_from_independent() {
    let a = sample_system(&ModelSpec::ising1d(0.0), &[16], 20_000, 4).unwrap();
    let b = sample_system(&ModelSpec::independent(), &[16], 20_000, 5).unwrap();
    for i in 0..16 {
        let (ma, va) = mean_var(&site_column(&a, i));
        let (mb, vb) = mean_var(&site_column(&b, i));
        let se = ((va + vb) / 20_000.0).sqrt();
        assert!((ma - mb).abs() < 4.0 * se, "site {i}: {ma} vs {mb}");
    }
    let (c, se) = sample_covariance(&site_column(&a, 0), &site_column(&a, 1));
    assert!(c.abs() < 3.0 * se);
}

#[test]
fn lag_correlations_follow_tanh_powers() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[64], 40_000, 6).unwrap();
    let profile = covariance_profile(&samples, 8, CovEstimator::AcrossConfigurations).unwrap();
    for r in 1..=8isize {
        let (c, se) = profile.at(&[r]).unwrap();
        let exact = ring_correlation(0.5, 64, r as usize);
        assert!((c - exact).abs() < 3.0 * se, "r={r}: {c} vs {exact} (se {se})");
    }
}

#[test]
fn covariance_is_symmetric_on_the_ring() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[40], 20_000, 7).unwrap();
    let profile = covariance_profile(&samples, 6, CovEstimator::AcrossConfigurations).unwrap();
    for r in 1..=6isize {
        let (a, sa) = profile.at(&[r]).unwrap();
        let (b, sb) = profile.at(&[-r]).unwrap();
        assert!((a - b).abs() < 3.0 * sa.hypot(sb), "r={r}");
    }
}

#[test]
fn partial_sums_rise_toward_the_susceptibility() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[128], 20_000, 8).unwrap();
    let profile = covariance_profile(&samples, 32, CovEstimator::AcrossConfigurations).unwrap();
    let site_var = mean_var(&site_column(&samples, 0)).1;
    assert!((profile.partial_sums[0] - site_var).abs() < 1e-12);
    assert!(profile.partial_sums.windows(2).all(|w| w[1] >= w[0] - 3.0 * 0.01));
    let t = 0.5f64.tanh();
    let v = (1.0 + t) / (1.0 - t);
    assert!((profile.susceptibility - v).abs() < 3.0 * profile.susceptibility_se);
    let late = profile.slow_variation.iter().find(|s| s.radius == 16).unwrap();
    assert!((late.ratio_2.unwrap() - 1.0).abs() < 0.05);
}

#[test]
fn independent_profile_is_flat() {
    let samples = sample_system(&ModelSpec::independent(), &[20], 10_000, 9).unwrap();
    let profile = covariance_profile(&samples, 4, CovEstimator::AcrossConfigurations).unwrap();
    for (u, (c, se)) in profile.offsets.iter().zip(profile.covariance.iter().zip(&profile.covariance_se)) {
        if u[0] != 0 {
            assert!(c.abs() < 3.0 * se, "offset {u:?}: {c}");
        }
    }
    let (_, var0) = mean_var(&site_column(&samples, 0));
    assert!((profile.susceptibility - var0).abs() < 3.0 * profile.susceptibility_se);
}

#[test]
fn spatial_average_agrees_with_configuration_average() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[32], 5_000, 10).unwrap();
    let a = covariance_profile(&samples, 3, CovEstimator::AcrossConfigurations).unwrap();
    let b = covariance_profile(&samples, 3, CovEstimator::SpatialAverage).unwrap();
    for r in 0..=3isize {
        let (x, sx) = a.at(&[r]).unwrap();
        let (y, _) = b.at(&[r]).unwrap();
        assert!((x - y).abs() < 3.0 * sx, "r={r}");
    }
}

#[test]
fn radius_must_fit_the_lattice() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[16], 10, 1).unwrap();
    assert!(matches!(covariance_profile(&samples, 8, CovEstimator::default()), Err(Error::RadiusTooLarge { .. })));
    let free = sample_system(&ModelSpec::ising1d(0.5).with_boundary(Boundary::Free), &[16], 10, 1).unwrap();
    assert!(covariance_profile(&free, 7, CovEstimator::default()).is_ok());
    assert!(covariance_profile(&free, 8, CovEstimator::default()).is_err());
}

#[test]
fn box_sums_normalize_by_root_volume() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[16], 100, 11).unwrap();
    let one = box_sums(&samples, &BoxSpec::new(vec![3], vec![1])).unwrap();
    assert_eq!(one.draws, site_column(&samples, 3));
    let four = box_sums(&samples, &BoxSpec::new(vec![2], vec![4])).unwrap();
    for (s, u) in samples.iter().zip(&four.draws) {
        assert_eq!(*u, s.values[2..6].iter().sum::<f64>() / 2.0);
    }
    assert_eq!(four.volume, 4);
    assert_eq!(four.susceptibility, four.variance);

    let grid = sample_system(&ModelSpec::ising2d(0.2), &[4, 5], 10, 11).unwrap();
    let b = box_sums(&grid, &BoxSpec::new(vec![1, 2], vec![2, 3])).unwrap();
    for (s, u) in grid.iter().zip(&b.draws) {
        let total: f64 =
            [1, 2].iter().flat_map(|&x| [2, 3, 4].map(move |y| (x, y))).map(|(x, y)| s.values[s.index(&[x, y])]).sum();
        assert!((u - total / 6f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn box_outside_the_lattice_is_rejected() {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[16], 10, 1).unwrap();
    assert!(matches!(box_sums(&samples, &BoxSpec::new(vec![10], vec![7])), Err(Error::BoxOutOfRange { .. })));
    assert!(box_sums(&samples, &BoxSpec::new(vec![10], vec![6])).is_ok());
}

#[test]
fn independent_box_sums_have_unit_variance() {
    let samples = sample_system(&ModelSpec::independent(), &[64], 20_000, 12).unwrap();
    for n in [1, 5, 64] {
        let s = box_sums(&samples, &BoxSpec::at_origin(vec![n])).unwrap();
        let se = (2.0 / s.len() as f64).sqrt();
        assert!((s.variance - 1.0).abs() < 3.0 * se, "n={n}: {}", s.variance);
    }
}

#[test]
fn ising_box_variance_matches_geometric_sum() {
    let l = 256;
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[l], 20_000, 13).unwrap();
    for n in [8, 64] {
        let exact = 1.0 + 2.0 * (1..n).map(|r| (1.0 - r as f64 / n as f64) * ring_correlation(0.5, l, r)).sum::<f64>();
        let s = box_sums(&samples, &BoxSpec::at_origin(vec![n])).unwrap();
        // variance of a sample variance for near-Gaussian sums: sqrt(2 / N) v
        let se = exact * (2.0 / s.len() as f64).sqrt();
        assert!((s.variance - exact).abs() < 3.0 * se, "n={n}: {} vs {exact}", s.variance);
    }
    let t = 0.5f64.tanh();
    let s = box_sums(&samples, &BoxSpec::at_origin(vec![l])).unwrap();
    let v = (1.0 + t) / (1.0 - t);
    assert!((s.variance - v).abs() / v < 0.05);
}

#[test]
fn field_is_centered_out() {
    let spec = ModelSpec::ising1d(0.3).with_field(0.4);
    let samples = sample_system(&spec, &[16], 500, 14).unwrap();
    let total: f64 = samples.iter().flat_map(|s| s.values.iter()).sum();
    assert!(total.abs() < 1e-8);
    let levels: Vec<f64> = samples.iter().flat_map(|s| s.values.iter().copied()).collect();
    // up spins dominate, so the centered up value sits below 1 and the down value below -1
    assert!(levels.iter().all(|&v| (v - 1.0).abs() > 0.05 && (v + 1.0).abs() > 0.05));
}

#[test]
fn invalid_models_are_rejected() {
    assert!(matches!(sample_system(&ModelSpec::ising1d(-0.1), &[8], 10, 1), Err(Error::NegativeCoupling(_))));
    assert!(sample_system(&ModelSpec::ising1d(0.1), &[usize::MAX / 2, 4], 10, 1).is_err());
    assert!(matches!(sample_system(&ModelSpec::ising1d(0.1), &[0], 10, 1), Err(Error::BadExtents(_))));
    assert!(sample_system(&ModelSpec::ising2d(0.1), &[8], 10, 1).is_err());
}

#[test]
fn two_dimensional_neighbours_are_positively_correlated() {
    let samples = sample_system(&ModelSpec::ising2d(0.3), &[8, 8], 2_000, 15).unwrap();
    let profile = covariance_profile(&samples, 2, CovEstimator::AcrossConfigurations).unwrap();
    let (c, se) = profile.at(&[0, 1]).unwrap();
    assert!(c > 3.0 * se, "nearest-neighbour covariance {c} (se {se})");
    let (far, _) = profile.at(&[2, 2]).unwrap();
    assert!(far < c);
}

fn adjacent_pairs(n: usize, samples: usize, seed: u64) -> Vec<(f64, f64)> {
    let s = sample_system(&ModelSpec::ising1d(0.5), &[4 * n], samples, seed).unwrap();
    let a = box_sums(&s, &BoxSpec::new(vec![0], vec![n])).unwrap();
    let b = box_sums(&s, &BoxSpec::new(vec![n], vec![n])).unwrap();
    a.draws.into_iter().zip(b.draws).collect()
}

#[test]
fn adjacent_boxes_are_positively_quadrant_dependent() {
    let pairs = adjacent_pairs(8, 20_000, 16);
    let report =
        quadrant_dependence(&pairs, &QuadrantGrid::quantiles(&pairs, 8), &TestFunction::default_family()).unwrap();
    assert!(report.min >= -3.0 * report.min_se, "min H {} (se {})", report.min, report.min_se);
    assert!(report.cov > 0.0);
    for t in &report.tests {
        assert!(t.lhs >= -3.0 * t.se, "increasing functions must not anticorrelate: {t:?}");
        assert!(t.holds, "{t:?}");
    }
}

#[test]
fn independent_pairs_have_no_quadrant_dependence() {
    let s = sample_system(&ModelSpec::independent(), &[16], 20_000, 17).unwrap();
    let a = box_sums(&s, &BoxSpec::new(vec![0], vec![4])).unwrap();
    let b = box_sums(&s, &BoxSpec::new(vec![4], vec![4])).unwrap();
    let pairs: Vec<(f64, f64)> = a.draws.into_iter().zip(b.draws).collect();
    let grid = QuadrantGrid::quantiles(&pairs, 4);
    let report = quadrant_dependence(&pairs, &grid, &[]).unwrap();
    for (h, se) in report.h.iter().zip(&report.se) {
        assert!(h.abs() <= 3.0 * se, "H {h} (se {se})");
    }
}

#[test]
fn antithetic_pairs_are_decisively_negative() {
    let pairs: Vec<(f64, f64)> = (0..1000).map(|i| if i % 2 == 0 { (1.0, -1.0) } else { (-1.0, 1.0) }).collect();
    let grid = QuadrantGrid { s: vec![0.0], t: vec![0.0] };
    let report = quadrant_dependence(&pairs, &grid, &[]).unwrap();
    // P(S >= 0, T >= 0) = 0 and P(S >= 0) = P(T >= 0) = 1/2
    assert_eq!(report.min, -0.25);
    assert!(report.min < -3.0 * report.min_se);
    assert!(report.cov < 0.0);

    let noisy: Vec<(f64, f64)> = common::correlated_normal_pairs(5_000, -0.8, 1);
    let report = quadrant_dependence(&noisy, &QuadrantGrid::quantiles(&noisy, 8), &[]).unwrap();
    assert!(report.min_z < -10.0, "z {}", report.min_z);
}

#[test]
fn quadrant_needs_a_hundred_pairs() {
    let pairs = vec![(0.0, 0.0); 99];
    let grid = QuadrantGrid { s: vec![0.0], t: vec![0.0] };
    assert!(matches!(quadrant_dependence(&pairs, &grid, &[]), Err(Error::TooFewSamples { needed: 100, .. })));
}
