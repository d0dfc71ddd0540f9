//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any criterion fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{corpus, ising_pairs, random_joint, random_mixture};
use fkgclt::experiments::{run_sweep, ExperimentConfig};
use fkgclt::inequalities::{
    decompose, factorization_bounds, fishdecomp_residual, moment_bound_audit, shuffle_pairs, JointSmoothedDensity,
    Quad2dSpec,
};
use fkgclt::infotheory::{gaussian_distances, relative_entropy_debruijn, relative_entropy_direct, DeBruijnSpec};
use fkgclt::lattice::{
    covariance_profile, quadrant_dependence, sample_system, CovEstimator, ModelSpec, QuadrantGrid, TestFunction,
};
use fkgclt::quadrature::QuadratureSpec;
use fkgclt::smoothing::SmoothedDensity;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn quad() -> QuadratureSpec<f64> {
    QuadratureSpec::default()
}

fn criterion(id: u32, name: &str, limit_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let mut o = f();
    let secs = start.elapsed().as_secs_f64();
    if let Some(limit) = limit_s {
        if secs >= limit {
            o.pass = false;
            o.detail.push_str(&format!("; runtime limit {limit} s exceeded"));
        }
    }
    let verdict = if o.pass { "PASS" } else { "FAIL" };
    println!("{verdict} {id:>2} {name}: {} [{secs:.2} s]", o.detail);
    o.pass
}

fn gaussian_null() -> Outcome {
    let m = SmoothedDensity::new(&[0.0], 1.0).unwrap();
    let f = m.fisher(&quad()).unwrap();
    let d = relative_entropy_direct(&m, &quad()).unwrap();
    let pass = (f.j - 1.0).abs() <= 1e-8 && f.j_st <= 1e-8 && d.value <= 1e-8;
    outcome(pass, format!("J = {:.3e}, J_st = {:.3e}, D = {:.3e}", f.j, f.j_st, d.value))
}

fn debruijn_agreement() -> Outcome {
    let spec = DeBruijnSpec { points: 200, t_max: 1e3, ..DeBruijnSpec::default() };
    let est = relative_entropy_debruijn(&[-1.0, 1.0], &spec).unwrap();
    let target = SmoothedDensity::new(&[-1.0, 1.0], est.resolved_bandwidth).unwrap().standardized().unwrap();
    let direct = relative_entropy_direct(&target, &quad()).unwrap();
    let gap = (direct.value - est.value).abs();
    let combined = est.certificate + direct.error;
    outcome(
        gap <= combined && est.certificate <= 5e-3,
        format!(
            "D_direct = {:.6e}, D_debruijn = {:.6e}, |diff| = {gap:.3e} <= {combined:.3e}, certificate {:.3e} <= 5e-3",
            direct.value, est.value, est.certificate
        ),
    )
}

fn decomposition_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut largest = 0;
    for seed in 0..5 {
        let j = random_joint(seed, 200);
        largest = largest.max(j.samples());
        for beta in [0.25, 0.5, 0.75] {
            worst = worst.max(fishdecomp_residual(&j, beta, &Quad2dSpec::default()).unwrap().residual);
        }
    }
    outcome(worst <= 1e-5, format!("max residual {worst:.3e} <= 1e-5 over 15 cases, up to {largest} centers"))
}

fn shuffled_subadditivity() -> Outcome {
    let pairs = ising_pairs(0.5, 8, 2000, 40);
    let mut pass = true;
    let mut worst_z = f64::INFINITY;
    let mut min_delta = f64::INFINITY;
    for beta in [0.25, 0.5, 0.75] {
        let terms: Vec<_> = (0..20)
            .map(|seed| {
                let j = JointSmoothedDensity::new(&shuffle_pairs(&pairs, seed), 1.0).unwrap();
                decompose(&j, beta, &Quad2dSpec::default()).unwrap()
            })
            .collect();
        let sums: Vec<f64> = terms.iter().map(|t| t.j_sum).collect();
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        let sd = (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (sums.len() - 1) as f64).sqrt();
        for t in &terms {
            let se = sd.hypot(t.errors[0] + t.errors[1] + t.errors[2]);
            let bound = beta * t.j_x + (1.0 - beta) * t.j_y;
            pass &= t.j_sum <= bound + 3.0 * se && t.delta >= -1e-10;
            if se > 0.0 {
                worst_z = worst_z.min((bound - t.j_sum) / se);
            }
            min_delta = min_delta.min(t.delta);
        }
    }
    outcome(
        pass,
        format!("60 shuffled joints, min (bound - J(sum)) / SE = {worst_z:.2} >= -3, min Delta = {min_delta:.3e}"),
    )
}

fn shimizu() -> Outcome {
    let (mut pass, mut min_tv, mut min_sup) = (true, f64::INFINITY, f64::INFINITY);
    for seed in 1000..1100 {
        let m = random_mixture(seed).standardized().unwrap();
        let g = gaussian_distances(&m, &quad()).unwrap();
        pass &= g.tv_holds && g.sup_holds;
        min_tv = min_tv.min(g.tv_bound - g.tv);
        min_sup = min_sup.min(g.sup_bound - g.sup);
    }
    outcome(
        pass,
        format!("100 mixtures, min TV slack {min_tv:.3e}, min sup slack {min_sup:.3e} (within certified error)"),
    )
}

fn score_bounds() -> Outcome {
    let (mut pass, mut ratio, mut body): (bool, f64, f64) = (true, 0.0, 0.0);
    for m in corpus() {
        let a = moment_bound_audit(&m, &[2, 4], &[1.5, 2.0, 4.0], None, 1000, &quad()).unwrap();
        pass &= a.pointwise.iter().all(|p| p.holds) && a.body.iter().all(|b| b.holds);
        ratio = a.pointwise.iter().map(|p| p.max_ratio).fold(ratio, f64::max);
        body = a.body.iter().map(|b| b.integral / b.bound).fold(body, f64::max);
    }
    outcome(pass, format!("20 models, max pointwise ratio {ratio:.6}, max body ratio {body:.3e}"))
}

fn fkg_audits() -> Outcome {
    let pairs = ising_pairs(0.5, 8, 100_000, 70);
    let grid = QuadrantGrid::quantiles(&pairs, 32);
    let h = quadrant_dependence(&pairs, &grid, &TestFunction::default_family()).unwrap();
    let joint = JointSmoothedDensity::new(&pairs, 1.0).unwrap();
    let a = factorization_bounds(&joint, 3.0, 0.5, None, 200, &Quad2dSpec::default()).unwrap();
    let allowance = a.noise_allowance.unwrap_or(0.0);
    let ratios = [a.ratio_density, a.ratio_dx_paper, a.ratio_dy_paper].map(|r| r.unwrap_or(0.0));
    let pass = h.min >= -3.0 * h.min_se && ratios.iter().all(|&r| r <= 1.0 + 3.0 * allowance);
    outcome(
        pass,
        format!(
            "min H = {:.3e} (SE {:.3e}), min H / SE = {:.1}, ratios density/dx/dy = {:.3}/{:.3}/{:.3} <= 1 + 3 x {allowance:.3e}",
            h.min, h.min_se, h.min_z, ratios[0], ratios[1], ratios[2]
        ),
    )
}

fn covariance_oracle() -> Outcome {
    let samples = sample_system(&ModelSpec::ising1d(0.5), &[128], 100_000, 80).unwrap();
    let p = covariance_profile(&samples, 32, CovEstimator::AcrossConfigurations).unwrap();
    let t = 0.5f64.tanh();
    let mut worst: f64 = 0.0;
    for r in 1..=8 {
        let (c, se) = p.at(&[r]).unwrap();
        worst = worst.max((c - t.powi(r as i32)).abs() / se);
    }
    let v = (1.0 + t) / (1.0 - t);
    let rel = (p.susceptibility - v).abs() / v;
    outcome(
        worst <= 3.0 && rel <= 0.05,
        format!(
            "max |C(r) - tanh(0.5)^r| / SE = {worst:.2} over r <= 8, susceptibility {:.4} vs {v:.4} ({:.2}%)",
            p.susceptibility,
            100.0 * rel
        ),
    )
}

/// Exact law of the normalized sum of `n` consecutive spins of the infinite zero-field chain.
fn exact_box_law(n: usize, coupling: f64) -> Vec<(f64, f64)> {
    let keep = (1.0 + coupling.tanh()) / 2.0;
    // probs[last spin][number of up spins]
    let mut probs = vec![vec![0.0; n + 1]; 2];
    probs[0][0] = 0.5;
    probs[1][1] = 0.5;
    for _ in 1..n {
        let mut next = vec![vec![0.0; n + 1]; 2];
        for last in 0..2 {
            for up in 0..=n {
                let p = probs[last][up];
                if p == 0.0 {
                    continue;
                }
                next[last][up + last] += p * keep;
                let flipped = 1 - last;
                next[flipped][up + flipped] += p * (1.0 - keep);
            }
        }
        probs = next;
    }
    (0..=n).map(|up| ((2.0 * up as f64 - n as f64) / (n as f64).sqrt(), probs[0][up] + probs[1][up])).collect()
}

fn convergence_sweep() -> Outcome {
    let mut cfg = ExperimentConfig::default();
    cfg.apply_text(
        "model.kind = ising1d\nmodel.J = 0.5\nsweep.tau = 1\nsweep.sizes = pow2:10\nsweep.samples = 10000\n",
    )
    .unwrap();
    let r = run_sweep(&cfg).unwrap();
    let last = r.records.last().unwrap();
    let v = &r.verdicts;
    let pass = v.j_st_nonincreasing && v.d_nonincreasing && last.j_st <= 0.05;
    let exact: Vec<String> = [1, 2, 4, 8]
        .iter()
        .map(|&n| {
            let m = SmoothedDensity::weighted(exact_box_law(n, 0.5), 1.0).unwrap();
            format!("{:.4}", m.fisher(&quad()).unwrap().j_st)
        })
        .collect();
    let est: Vec<String> = r.records.iter().take(4).map(|rec| format!("{:.4}", rec.j_st)).collect();
    outcome(
        pass,
        format!(
            "J_st(1024) = {:.3e} <= 0.05; non-increasing within 2 SE: {}; D intervals shrinking: {}; \
             J_st at n = 1,2,4,8 estimated [{}], exact [{}]",
            last.j_st,
            v.j_st_nonincreasing,
            v.d_nonincreasing,
            est.join(", "),
            exact.join(", ")
        ),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// Runs the command into a fresh `out` directory and returns its stdout and every file written.
fn cli_run(args: &[&str], out: &Path) -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
    if out.exists() {
        std::fs::remove_dir_all(out).unwrap();
    }
    std::fs::create_dir_all(out).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fkgclt")).args(args).output().unwrap();
    assert!(o.status.code().is_some_and(|c| c == 0 || c == 2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    (o.stdout, snapshot(out))
}

fn reproducibility() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    std::fs::create_dir_all(&data).unwrap();
    let spins = data.join("spins.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_fkgclt"))
        .args(["sample", "--kind", "ising1d", "-J", "0.5", "--extents", "8", "--count", "400", "--seed", "5"])
        .args(["-o", spins.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success());
    let pairs: String = ising_pairs(0.5, 4, 300, 9)
        .iter()
        .map(|(a, b)| format!("{},{}\n", fkgclt::experiments::fmt_g17(*a), b))
        .collect();
    let pairs_path = data.join("pairs.csv");
    std::fs::write(&pairs_path, pairs).unwrap();

    let out = root.path().join("out");
    let o = out.to_str().unwrap();
    let (s, p) = (spins.to_str().unwrap(), pairs_path.to_str().unwrap());
    let sample_out = format!("{o}/s.csv");
    let runs: Vec<Vec<&str>> = vec![
        vec!["sample", "--kind", "ising2d", "-J", "0.3", "--extents", "6x6", "--count", "50", "-o", &sample_out],
        vec!["fisher", "-i", s, "--tau", "0.5"],
        vec!["entropy", "-i", s, "--tau", "1"],
        vec!["verify", "-i", p, "--grid", "40"],
        vec![
            "sweep",
            "--set",
            "sweep.sizes=1,2,4,8",
            "--set",
            "sweep.samples=1000",
            "--set",
            "sweep.bootstrap=10",
            "--set",
            "model.kind=ising1d",
            "--set",
            "model.J=0.5",
            "--set",
            "output.dump_samples=true",
            "-o",
            o,
        ],
        vec![
            "audit",
            "--set",
            "audit.pairs=2:1,4:4",
            "--set",
            "audit.samples=1000",
            "--set",
            "audit.bootstrap=10",
            "-o",
            o,
        ],
    ];
    let mut same = Vec::new();
    for args in &runs {
        let first = cli_run(args, &out);
        let second = cli_run(args, &out);
        same.push((args[0], !first.1.is_empty() || !first.0.is_empty(), first == second));
    }
    let pass = same.iter().all(|s| s.1 && s.2);
    let detail: Vec<String> =
        same.iter().map(|(c, _, eq)| format!("{c} {}", if *eq { "identical" } else { "DIFFERS" })).collect();
    outcome(pass, detail.join(", "))
}

fn main() {
    let results = [
        criterion(1, "Gaussian null", Some(1.0), gaussian_null),
        criterion(2, "de Bruijn route agreement", Some(60.0), debruijn_agreement),
        criterion(3, "decomposition identity", Some(120.0), decomposition_identity),
        criterion(4, "independent sub-additivity", None, shuffled_subadditivity),
        criterion(5, "Shimizu bounds", None, shimizu),
        criterion(6, "score moment and body bounds", None, score_bounds),
        criterion(7, "FKG audits", Some(300.0), fkg_audits),
        criterion(8, "covariance oracle", None, covariance_oracle),
        criterion(9, "convergence sweep", Some(600.0), convergence_sweep),
        criterion(10, "CLI reproducibility", None, reproducibility),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed < results.len() {
        std::process::exit(1);
    }
}
