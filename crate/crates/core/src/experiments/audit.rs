//! Audit of the sub-additive recursion for adjacent boxes.
//!
//! A box of volume `m + n` is cut parallel to a face into adjacent boxes of
//! volumes `m` and `n`. With `beta = m / (m + n)` the normalized sum of the
//! large box is `sqrt(beta) U_m + sqrt(1 - beta) U_n`, so the Fisher
//! informations of the three smoothed sums enter the recursion
//! `J(m + n) <= beta J(m) + (1 - beta) J(n) + d`.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{fmt_g17, fmt_opt, write_csv, write_json};
use super::sweep::BOOTSTRAP_STREAM;
use crate::error::{Error, Result};
use crate::inequalities::{
    fishdecomp_residual, theorem_gap, DecompositionReport, ExponentMode, GapOptions, JointSmoothedDensity, Quad2dSpec,
};
use crate::lattice::{box_sums, mean_var, sample_covariance, sample_system, stream_rng, BoxSpec, LatticeSample};
use crate::quadrature::QuadratureSpec;
use crate::smoothing::SmoothedDensity;

#[derive(Clone, Debug, Serialize)]
pub struct AuditRecord {
    pub m: usize,
    pub n: usize,
    pub beta: f64,
    pub boxes: [BoxSpec; 2],
    pub j_m: f64,
    pub j_n: f64,
    pub j_sum: f64,
    /// `J(m + n) - beta J(m) - (1 - beta) J(n)`: the correction the recursion needs.
    pub d: f64,
    pub d_se: f64,
    /// Sample covariance of the two box sums.
    pub c: f64,
    pub c_se: f64,
    pub delta: f64,
    pub delta_error: f64,
    pub identity_residual: f64,
    /// Full decomposition; absent when the sample covariance is negative.
    pub decomposition: Option<DecompositionReport<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrectionByM {
    pub m: usize,
    /// Correction needed at this `m`: the positive part of the largest `d` over the audited `n`.
    pub d: f64,
    /// The largest `d` itself, negative when the recursion holds with room to spare.
    pub signed: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderStep {
    pub m: usize,
    pub j_m: f64,
    pub j_2m: f64,
    /// `J(m) - J(2m)`, the per-step decrease along the doubling ladder.
    pub gap: f64,
    pub j_st_m: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditSweepReport {
    pub config: ExperimentConfig,
    pub extents: Vec<usize>,
    pub tau: f64,
    pub records: Vec<AuditRecord>,
    pub d_by_m: Vec<CorrectionByM>,
    pub ladder: Vec<LadderStep>,
    /// `d(m') <= d(m) + 2 SE` for all `m' > m`.
    pub d_decreasing: bool,
}

/// Adjacent boxes of volumes `m` and `n` split along the first axis.
pub fn adjacent_boxes(dimension: usize, m: usize, n: usize, width: usize) -> [BoxSpec; 2] {
    if dimension == 2 {
        [BoxSpec::new(vec![0, 0], vec![m, width]), BoxSpec::new(vec![m, 0], vec![n, width])]
    } else {
        [BoxSpec::new(vec![0], vec![m]), BoxSpec::new(vec![m], vec![n])]
    }
}

fn fishers(pairs: &[(f64, f64)], beta: f64, tau: f64, quad: &QuadratureSpec<f64>) -> Result<[f64; 3]> {
    let (a, b) = (beta.sqrt(), (1.0 - beta).sqrt());
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let zs: Vec<f64> = pairs.iter().map(|p| a * p.0 + b * p.1).collect();
    let j = |v: &[f64]| SmoothedDensity::new(v, tau).and_then(|m| m.fisher(quad)).map(|f| f.j);
    Ok([j(&xs)?, j(&ys)?, j(&zs)?])
}

fn correction(js: [f64; 3], beta: f64) -> f64 {
    js[2] - beta * js[0] - (1.0 - beta) * js[1]
}

fn audit_pair(
    cfg: &ExperimentConfig,
    samples: &[LatticeSample],
    (m, n): (usize, usize),
    index: u64,
) -> Result<AuditRecord> {
    let dim = samples[0].dimension();
    let boxes = adjacent_boxes(dim, m, n, cfg.audit.width);
    let sa = box_sums(samples, &boxes[0])?;
    let sb = box_sums(samples, &boxes[1])?;
    let pairs: Vec<(f64, f64)> = sa.draws.iter().cloned().zip(sb.draws.iter().cloned()).collect();
    let tau = cfg.sweep.tau;
    let beta = m as f64 / (m + n) as f64;
    let js = fishers(&pairs, beta, tau, &cfg.quad)?;
    let d = correction(js, beta);

    let reps = cfg.audit.bootstrap;
    let d_se = if reps >= 2 {
        let ds: Vec<f64> = (0..reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(cfg.seed, BOOTSTRAP_STREAM + (1 << 40) + (index << 24) + r);
                let resampled: Vec<(f64, f64)> =
                    (0..pairs.len()).map(|_| pairs[rng.random_range(0..pairs.len())]).collect();
                fishers(&resampled, beta, tau, &cfg.quad).map(|js| correction(js, beta))
            })
            .collect::<Result<_>>()?;
        mean_var(&ds).1.sqrt()
    } else {
        0.0
    };
    let (c, c_se) = sample_covariance(&sa.draws, &sb.draws);

    let joint = JointSmoothedDensity::new(&pairs, tau)?;
    let spec = Quad2dSpec { nodes: cfg.audit.nodes, seed: cfg.seed, ..Quad2dSpec::default() };
    let opts =
        GapOptions { beta, epsilon: cfg.audit.epsilon, k_bound: None, mode: ExponentMode::Epsilon, ks: vec![2, 4] };
    let (delta, delta_error, identity_residual, decomposition) = match theorem_gap(&joint, &opts, &spec) {
        Ok(r) => (r.delta, r.delta_error, r.identity_residual, Some(r)),
        Err(Error::NegativeCovariance(_)) => {
            let check = fishdecomp_residual(&joint, beta, &spec)?;
            (check.terms.delta, check.terms.errors[5], check.residual, None)
        }
        Err(e) => return Err(e),
    };
    Ok(AuditRecord {
        m,
        n,
        beta,
        boxes,
        j_m: js[0],
        j_n: js[1],
        j_sum: js[2],
        d,
        d_se,
        c,
        c_se,
        delta,
        delta_error,
        identity_residual,
        decomposition,
    })
}

/// Runs the recursion audit for every configured `(m, n)`.
pub fn run_audit(cfg: &ExperimentConfig) -> Result<AuditSweepReport> {
    cfg.validate()?;
    if cfg.audit.pairs.is_empty() {
        return Err(Error::Config("audit.pairs is empty".into()));
    }
    if let Some(&(m, n)) = cfg.audit.pairs.iter().find(|(m, n)| m < n || *n == 0) {
        return Err(Error::Config(format!("audit pair {m}:{n} needs m >= n >= 1")));
    }
    let dim = cfg.dimension();
    let longest = cfg.audit.pairs.iter().map(|(m, n)| m + n).max().unwrap();
    let extents = match &cfg.extents {
        Some(e) => e.clone(),
        None if dim == 2 => vec![2 * longest, 2 * cfg.audit.width],
        None => vec![2 * longest],
    };
    if extents.len() != dim || extents[0] < longest || (dim == 2 && extents[1] < cfg.audit.width) {
        return Err(Error::Config(format!("lattice {extents:?} cannot hold adjacent boxes of total length {longest}")));
    }
    let samples = sample_system(&cfg.model, &extents, cfg.audit.samples, cfg.seed)?;
    let records: Vec<AuditRecord> = cfg
        .audit
        .pairs
        .iter()
        .enumerate()
        .map(|(i, &p)| audit_pair(cfg, &samples, p, i as u64))
        .collect::<Result<_>>()?;

    let mut ms: Vec<usize> = records.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    let d_by_m: Vec<CorrectionByM> = ms
        .iter()
        .map(|&m| {
            let best = records.iter().filter(|r| r.m == m).fold(None::<&AuditRecord>, |b, r| match b {
                Some(b) if b.d >= r.d => Some(b),
                _ => Some(r),
            });
            let best = best.unwrap();
            CorrectionByM { m, d: best.d.max(0.0), signed: best.d, se: best.d_se }
        })
        .collect();
    let d_decreasing = (0..d_by_m.len())
        .all(|i| (i + 1..d_by_m.len()).all(|k| d_by_m[k].d <= d_by_m[i].d + 2.0 * d_by_m[i].se.hypot(d_by_m[k].se)));

    let mut ladder: Vec<LadderStep> = records
        .iter()
        .filter(|r| r.m == r.n)
        .map(|r| LadderStep { m: r.m, j_m: r.j_m, j_2m: r.j_sum, gap: r.j_m - r.j_sum, j_st_m: f64::NAN })
        .collect();
    ladder.sort_by_key(|s| s.m);
    for step in &mut ladder {
        let rec = records.iter().find(|r| r.m == step.m && r.n == step.m).unwrap();
        let draws = box_sums(&samples, &rec.boxes[0])?.draws;
        let model = SmoothedDensity::new(&draws, cfg.sweep.tau)?;
        step.j_st_m = model.variance() * step.j_m - 1.0;
    }

    Ok(AuditSweepReport { config: cfg.clone(), extents, tau: cfg.sweep.tau, records, d_by_m, ladder, d_decreasing })
}

pub const AUDIT_CSV_HEADER: [&str; 15] = [
    "m",
    "n",
    "beta",
    "J_m",
    "J_n",
    "J_sum",
    "d",
    "d_se",
    "c",
    "c_se",
    "Delta",
    "Delta_err",
    "identity_residual",
    "minimal_C",
    "B",
];

/// Writes `audit.csv` and `audit.json`.
pub fn write_audit(report: &AuditSweepReport, dir: &Path) -> Result<()> {
    let rows = report.records.iter().map(|r| {
        let dec = r.decomposition.as_ref();
        vec![
            r.m.to_string(),
            r.n.to_string(),
            fmt_g17(r.beta),
            fmt_g17(r.j_m),
            fmt_g17(r.j_n),
            fmt_g17(r.j_sum),
            fmt_g17(r.d),
            fmt_g17(r.d_se),
            fmt_g17(r.c),
            fmt_g17(r.c_se),
            fmt_g17(r.delta),
            fmt_g17(r.delta_error),
            fmt_g17(r.identity_residual),
            fmt_opt(dec.and_then(|d| d.minimal_c)),
            fmt_opt(dec.and_then(|d| d.b)),
        ]
    });
    write_csv(&dir.join("audit.csv"), &AUDIT_CSV_HEADER, rows)?;
    write_json(&dir.join("audit.json"), report)
}
