use fkgclt::experiments::{fmt_g17, ExperimentConfig};
use fkgclt::inequalities::{delta, fishdecomp_residual, theta_seminorm, JointSmoothedDensity, Quad2dSpec};
use fkgclt::lattice::{sample_system, ModelSpec};
use fkgclt::quadrature::QuadratureSpec;
use fkgclt::smoothing::SmoothedDensity;
use proptest::prelude::*;

fn quad() -> QuadratureSpec<f64> {
    QuadratureSpec::default()
}

fn mixture() -> impl Strategy<Value = SmoothedDensity<f64>> {
    (prop::collection::vec(-4.0..4.0f64, 1..7), 0.1..3.0f64).prop_map(|(c, tau)| SmoothedDensity::new(&c, tau).unwrap())
}

fn joint() -> impl Strategy<Value = JointSmoothedDensity<f64>> {
    (prop::collection::vec((-2.5..2.5f64, -2.5..2.5f64), 1..6), 0.3..2.0f64)
        .prop_map(|(p, tau)| JointSmoothedDensity::new(&p, tau).unwrap())
}

fn small_2d() -> Quad2dSpec<f64> {
    Quad2dSpec { nodes: 128, ..Quad2dSpec::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densities_integrate_to_one(m in mixture()) {
        let total = m.integrate_window(&quad(), |_, e| e.density);
        prop_assert!((total.value - 1.0).abs() < 1e-9, "{}", total.value);
    }

    #[test]
    fn fisher_information_is_bracketed(m in mixture()) {
        let f = m.fisher(&quad()).unwrap();
        let slack = f.error + 1e-12;
        prop_assert!(f.j * m.variance() >= 1.0 - slack * m.variance());
        prop_assert!(f.j <= 1.0 / m.tau() + slack);
        prop_assert!(f.j_st >= -slack * m.variance());
    }

    #[test]
    fn standardized_fisher_is_scale_invariant(m in mixture(), c in prop_oneof![-3.0..-0.2f64, 0.2..3.0f64], a in -5.0..5.0f64) {
        let base = m.fisher(&quad()).unwrap();
        let moved = m.shift(a).rescale(c).unwrap().fisher(&quad()).unwrap();
        prop_assert!((base.j_st - moved.j_st).abs() <= 1e-8 * (1.0 + base.j_st), "{} vs {}", base.j_st, moved.j_st);
        prop_assert!((moved.j * c * c - base.j).abs() <= 1e-8 * base.j);
    }

    #[test]
    fn tail_profile_is_monotone(m in mixture()) {
        let radii: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        let t = m.tail_profile(&radii).unwrap();
        prop_assert!((t.profile[0] - 1.0).abs() < 1e-12);
        for w in t.profile.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 && w[1] >= 0.0);
        }
    }

    #[test]
    fn scores_are_log_derivatives(m in mixture(), u in -6.0..6.0f64) {
        let h = 1e-5 * m.tau().sqrt();
        let fd = (m.log_density(u + h) - m.log_density(u - h)) / (2.0 * h);
        let s = m.score(u);
        prop_assert!((s - fd).abs() <= 1e-5 * (1.0 + s.abs()) / m.tau(), "{s} vs {fd}");
    }

    #[test]
    fn theta_is_a_seminorm(c0 in -3.0..3.0f64, c1 in -3.0..3.0f64, c3 in -1.0..1.0f64, tau in 0.2..4.0f64) {
        let affine = theta_seminorm(|z| c0 + c1 * z, tau, &quad()).unwrap();
        prop_assert!(affine.residual.abs() <= 1e-12);
        let cubic = theta_seminorm(|z| c0 + c1 * z + c3 * z * z * z, tau, &quad()).unwrap();
        let v = tau / 2.0;
        prop_assert!(cubic.residual >= 0.0);
        prop_assert!((cubic.residual - 6.0 * c3 * c3 * v * v * v).abs() <= 1e-10 * (1.0 + cubic.residual));
    }

    #[test]
    fn g17_round_trips(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn size_schedules_are_strictly_increasing(mut v in prop::collection::vec(1usize..5000, 1..12), k in 0u32..14) {
        let mut cfg = ExperimentConfig::default();
        cfg.set("sweep.sizes", &format!("pow2:{k}")).unwrap();
        prop_assert_eq!(cfg.sweep.sizes.len(), k as usize + 1);
        prop_assert!(cfg.sweep.sizes.windows(2).all(|w| w[1] == 2 * w[0]));
        let text: Vec<String> = v.iter().map(usize::to_string).collect();
        let accepted = cfg.set("sweep.sizes", &text.join(",")).is_ok();
        v.dedup();
        prop_assert_eq!(accepted, v.windows(2).all(|w| w[0] < w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn delta_is_nonnegative(j in joint(), beta in 0.0..=1.0f64) {
        let d = delta(&j, beta, &small_2d()).unwrap();
        prop_assert!(d.value >= -1e-10, "{}", d.value);
    }

    #[test]
    fn decomposition_identity_is_exact(j in joint(), beta in 0.05..0.95f64) {
        let c = fishdecomp_residual(&j, beta, &small_2d()).unwrap();
        prop_assert!(c.residual <= 1e-6, "{c:?}");
    }

    #[test]
    fn sampling_is_deterministic(seed in 0u64..1000, coupling in 0.0..1.0f64) {
        let spec = ModelSpec::ising1d(coupling);
        let a = sample_system(&spec, &[12], 5, seed).unwrap();
        let b = sample_system(&spec, &[12], 5, seed).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.values == y.values));
    }
}
