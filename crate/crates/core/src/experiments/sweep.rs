//! Convergence sweeps of the standardized Fisher information over growing boxes.

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, MIN_SWEEP_SAMPLES};
use super::output::{fmt_g17, fmt_opt, write_csv, write_json};
use crate::error::{Error, Result};
use crate::infotheory::{gaussian_distances, relative_entropy_debruijn_model, relative_entropy_direct};
use crate::lattice::{box_sums, covariance_profile, sample_system, stream_rng, BoxSpec, CovEstimator, LatticeSample};
use crate::quadrature::{trapezoid, QuadratureSpec};
use crate::smoothing::SmoothedDensity;

/// Generator streams at or above this value are reserved for bootstrap resampling.
pub(crate) const BOOTSTRAP_STREAM: u64 = 1 << 48;

/// Radii at which the tail profile is evaluated.
const TAIL_RADII: [f64; 7] = [0.0, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0];

#[derive(Clone, Debug, Serialize)]
pub struct TailSummary {
    pub radii: Vec<f64>,
    pub profile: Vec<f64>,
    /// Fitted `gamma` in `A exp(-gamma R^2 / 2)`.
    pub exponent: Option<f64>,
    pub prefactor: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeValue {
    pub shape: Vec<usize>,
    pub j_st: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRecord {
    pub n: usize,
    /// Box extents; in 2-D the factorization with the largest `J_st`.
    pub shape: Vec<usize>,
    /// Every factorization tried (2-D only).
    pub shapes: Vec<ShapeValue>,
    /// Variance of the normalized box sums.
    pub variance: f64,
    pub j: f64,
    pub j_st: f64,
    /// Bootstrap standard error of `J_st`.
    pub j_st_se: f64,
    /// Quadrature error of `J_st`.
    pub j_st_error: f64,
    pub d_direct: f64,
    pub d_direct_error: f64,
    pub d_debruijn: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub d_certificate: f64,
    /// `|D_direct - D_debruijn|` within the combined certificate.
    pub routes_agree: bool,
    pub tv: f64,
    pub sup: f64,
    pub tv_bound: f64,
    pub sup_bound: f64,
    pub shimizu_holds: bool,
    pub tail: TailSummary,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Condition3 {
    pub n: usize,
    /// Trapezoid value of `int kappa(n, tau) / (1 + tau) dtau` over the bandwidth grid.
    pub partial: f64,
    /// Bound on the same integral beyond the largest bandwidth.
    pub tail_certificate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KappaTable {
    pub taus: Vec<f64>,
    pub sizes: Vec<usize>,
    /// `J_st(V_n^(tau))`, indexed `[size][tau]`.
    pub j_st: Vec<Vec<f64>>,
    pub j_st_se: Vec<Vec<f64>>,
    /// `max_{m >= n} J_st(V_m^(tau))` over the schedule.
    pub kappa: Vec<Vec<f64>>,
    pub condition3: Vec<Condition3>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Susceptibility {
    pub radius: usize,
    pub value: f64,
    pub se: f64,
    /// `K(R) / K(R/2)`.
    pub doubling_ratio: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepVerdicts {
    /// `J_st(V_m) <= J_st(V_n) + 2 SE` for all `m > n`.
    pub j_st_nonincreasing: bool,
    /// `D_lo(m) <= D_hi(n)` for all `m > n`.
    pub d_nonincreasing: bool,
    /// The raw `J_st(V_n^(tau))` table is non-increasing in `n` within 2 SE at every bandwidth.
    pub kappa_monotone: bool,
    /// Condition-3 partial integrals are finite and non-increasing, and strictly smaller at the end.
    pub condition3_decreasing: bool,
    pub routes_agree: bool,
    pub shimizu_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub config: ExperimentConfig,
    pub extents: Vec<usize>,
    pub records: Vec<SweepRecord>,
    pub kappa: KappaTable,
    pub susceptibility: Option<Susceptibility>,
    pub verdicts: SweepVerdicts,
    /// Normalized box sums behind each record.
    #[serde(skip)]
    pub draws: Vec<Vec<f64>>,
}

/// Every box shape of volume `n` that fits in `extents`.
pub fn box_shapes(n: usize, extents: &[usize]) -> Vec<Vec<usize>> {
    match extents {
        [l] => {
            if n <= *l {
                vec![vec![n]]
            } else {
                vec![]
            }
        }
        [l0, l1] => {
            (1..=n).filter(|a| n.is_multiple_of(*a) && *a <= *l0 && n / a <= *l1).map(|a| vec![a, n / a]).collect()
        }
        _ => vec![],
    }
}

/// Lattice extents for a run: configured, or twice the largest box per axis.
pub(crate) fn resolve_extents(cfg: &ExperimentConfig, largest: usize) -> Vec<usize> {
    if let Some(e) = &cfg.extents {
        return e.clone();
    }
    if cfg.dimension() == 2 {
        let side = (largest as f64).sqrt().ceil() as usize;
        vec![2 * side, 2 * side]
    } else {
        vec![2 * largest]
    }
}

/// Standard deviations across resampled centers of `J_st` at each bandwidth.
pub(crate) fn bootstrap_j_st(
    draws: &[f64],
    taus: &[f64],
    reps: usize,
    seed: u64,
    stream: u64,
    quad: &QuadratureSpec<f64>,
) -> Result<Vec<f64>> {
    if reps < 2 {
        return Ok(vec![0.0; taus.len()]);
    }
    let reps: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, stream + r);
            let resampled: Vec<f64> = (0..draws.len()).map(|_| draws[rng.random_range(0..draws.len())]).collect();
            taus.iter()
                .map(|&t| SmoothedDensity::new(&resampled, t).and_then(|m| m.fisher(quad)).map(|f| f.j_st))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..taus.len())
        .map(|j| {
            let col: Vec<f64> = reps.iter().map(|r| r[j]).collect();
            crate::lattice::mean_var(&col).1.sqrt()
        })
        .collect())
}

fn draws_for(samples: &[LatticeSample], shape: &[usize]) -> Result<Vec<f64>> {
    Ok(box_sums(samples, &BoxSpec::at_origin(shape.to_vec()))?.draws)
}

fn susceptibility(
    cfg: &ExperimentConfig,
    samples: &[LatticeSample],
    extents: &[usize],
) -> Result<Option<Susceptibility>> {
    let smallest = *extents.iter().min().unwrap();
    let radius = cfg.sweep.cov_radius.unwrap_or(32).min(smallest.saturating_sub(1) / 2);
    if radius == 0 || samples.len() < 2 {
        return Ok(None);
    }
    let p = covariance_profile(samples, radius, CovEstimator::AcrossConfigurations)?;
    let doubling_ratio = (radius >= 2).then(|| p.partial_sums[radius] / p.partial_sums[radius / 2]);
    Ok(Some(Susceptibility { radius, value: p.susceptibility, se: p.susceptibility_se, doubling_ratio }))
}

fn pairwise_ok(values: &[f64], slack: impl Fn(usize, usize) -> f64) -> bool {
    (0..values.len()).all(|i| (i + 1..values.len()).all(|k| values[k] <= values[i] + slack(i, k)))
}

/// Runs the configured convergence sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    if cfg.sweep.samples < MIN_SWEEP_SAMPLES {
        return Err(Error::Config(format!(
            "sweep.samples = {} is below the minimum {MIN_SWEEP_SAMPLES}",
            cfg.sweep.samples
        )));
    }
    let sizes = &cfg.sweep.sizes;
    let extents = resolve_extents(cfg, *sizes.last().unwrap());
    let shapes: Vec<Vec<Vec<usize>>> = sizes.iter().map(|&n| box_shapes(n, &extents)).collect();
    if let Some(i) = shapes.iter().position(Vec::is_empty) {
        return Err(Error::Config(format!("no box of volume {} fits in lattice {extents:?}", sizes[i])));
    }
    let samples = sample_system(&cfg.model, &extents, cfg.sweep.samples, cfg.seed)?;
    let tau = cfg.sweep.tau;
    let quad = &cfg.quad;

    let mut records = Vec::with_capacity(sizes.len());
    let mut all_draws = Vec::with_capacity(sizes.len());
    let mut table = Vec::with_capacity(sizes.len());
    let mut table_se = Vec::with_capacity(sizes.len());
    let mut center_var = Vec::with_capacity(sizes.len());
    for (idx, (&n, candidates)) in sizes.iter().zip(&shapes).enumerate() {
        let start = Instant::now();
        let tried: Vec<(Vec<usize>, Vec<f64>, f64)> = candidates
            .iter()
            .map(|shape| {
                let d = draws_for(&samples, shape)?;
                let j = SmoothedDensity::new(&d, tau)?.fisher(quad)?.j_st;
                Ok((shape.clone(), d, j))
            })
            .collect::<Result<_>>()?;
        // first maximal shape wins, keeping the choice deterministic
        let best = tried.iter().enumerate().fold(0, |b, (i, t)| if t.2 > tried[b].2 { i } else { b });
        let (shape, draws, _) = tried[best].clone();
        let shapes_out = if extents.len() == 2 {
            tried.iter().map(|(s, _, j)| ShapeValue { shape: s.clone(), j_st: *j }).collect()
        } else {
            Vec::new()
        };

        let model = SmoothedDensity::new(&draws, tau)?;
        let fisher = model.fisher(quad)?;
        let standardized = model.standardized()?;
        let direct = relative_entropy_direct(&standardized, quad)?;
        let db = relative_entropy_debruijn_model(&model, &cfg.debruijn)?;
        let dist = gaussian_distances(&standardized, quad)?;
        let tail = model.tail_profile(&TAIL_RADII)?;

        let mut taus = vec![tau];
        taus.extend_from_slice(&cfg.sweep.kappa_taus);
        let se = bootstrap_j_st(
            &draws,
            &taus,
            cfg.sweep.bootstrap,
            cfg.seed,
            BOOTSTRAP_STREAM + ((idx as u64) << 24),
            quad,
        )?;
        let row: Vec<f64> = cfg
            .sweep
            .kappa_taus
            .iter()
            .map(|&t| SmoothedDensity::new(&draws, t).and_then(|m| m.fisher(quad)).map(|f| f.j_st))
            .collect::<Result<_>>()?;
        table.push(row);
        table_se.push(se[1..].to_vec());
        center_var.push(model.center_variance());

        records.push(SweepRecord {
            n,
            shape,
            shapes: shapes_out,
            variance: model.center_variance(),
            j: fisher.j,
            j_st: fisher.j_st,
            j_st_se: se[0],
            j_st_error: fisher.error,
            d_direct: direct.value,
            d_direct_error: direct.error,
            d_debruijn: db.value,
            d_lo: db.lower,
            d_hi: db.upper,
            d_certificate: db.certificate,
            routes_agree: (direct.value - db.value).abs() <= db.certificate + direct.error,
            tv: dist.tv,
            sup: dist.sup,
            tv_bound: dist.tv_bound,
            sup_bound: dist.sup_bound,
            shimizu_holds: dist.tv_holds && dist.sup_holds,
            tail: TailSummary {
                radii: tail.radii,
                profile: tail.profile,
                exponent: tail.exponent,
                prefactor: tail.prefactor,
            },
            runtime_ms: cfg.output.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
        });
        all_draws.push(draws);
    }

    let kappa = kappa_table(sizes, &cfg.sweep.kappa_taus, table, table_se, &center_var);
    let jst: Vec<f64> = records.iter().map(|r| r.j_st).collect();
    let jse: Vec<f64> = records.iter().map(|r| r.j_st_se).collect();
    let d_lo: Vec<f64> = records.iter().map(|r| r.d_lo).collect();
    let d_hi: Vec<f64> = records.iter().map(|r| r.d_hi).collect();
    let kappa_monotone = (0..kappa.taus.len()).all(|j| {
        let col: Vec<f64> = kappa.j_st.iter().map(|r| r[j]).collect();
        pairwise_ok(&col, |i, k| 2.0 * kappa.j_st_se[i][j].hypot(kappa.j_st_se[k][j]))
    });
    let parts: Vec<f64> = kappa.condition3.iter().map(|c| c.partial).collect();
    let condition3_decreasing = parts.iter().all(|p| p.is_finite())
        && parts.windows(2).all(|w| w[1] <= w[0])
        && (parts.len() < 2 || parts[parts.len() - 1] < parts[0]);
    let verdicts = SweepVerdicts {
        j_st_nonincreasing: pairwise_ok(&jst, |i, k| 2.0 * jse[i].hypot(jse[k])),
        d_nonincreasing: (0..d_lo.len()).all(|i| (i + 1..d_lo.len()).all(|k| d_lo[k] <= d_hi[i])),
        kappa_monotone,
        condition3_decreasing,
        routes_agree: records.iter().all(|r| r.routes_agree),
        shimizu_holds: records.iter().all(|r| r.shimizu_holds),
    };
    Ok(SweepReport {
        config: cfg.clone(),
        susceptibility: susceptibility(cfg, &samples, &extents)?,
        extents,
        records,
        kappa,
        verdicts,
        draws: all_draws,
    })
}

fn kappa_table(
    sizes: &[usize],
    taus: &[f64],
    j_st: Vec<Vec<f64>>,
    j_st_se: Vec<Vec<f64>>,
    center_var: &[f64],
) -> KappaTable {
    let rows = j_st.len();
    let mut kappa = j_st.clone();
    for i in (0..rows.saturating_sub(1)).rev() {
        let (head, tail) = kappa.split_at_mut(i + 1);
        for (a, b) in head[i].iter_mut().zip(&tail[0]) {
            *a = a.max(*b);
        }
    }
    let logs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let condition3 = (0..rows)
        .map(|i| {
            let y: Vec<f64> = kappa[i].iter().zip(taus).map(|(k, t)| k * t / (1.0 + t)).collect();
            // J_st(V^(tau)) <= Var(centers) / tau, integrated against 1/(1+tau) beyond the grid
            let var = center_var[i..].iter().cloned().fold(0.0, f64::max);
            let tail_certificate = taus.last().map_or(f64::INFINITY, |t| var * ((1.0 + t) / t).ln());
            Condition3 {
                n: sizes[i],
                partial: if taus.len() > 1 { trapezoid(&logs, &y) } else { 0.0 },
                tail_certificate,
            }
        })
        .collect();
    KappaTable { taus: taus.to_vec(), sizes: sizes.to_vec(), j_st, j_st_se, kappa, condition3 }
}

pub const SWEEP_CSV_HEADER: [&str; 7] = ["n", "Jst", "Jst_se", "D_lo", "D_hi", "TV", "runtime_ms"];

/// Writes `sweep.csv`, `sweep.json` and, when configured, the box sums.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<()> {
    let rows = report.records.iter().map(|r| {
        vec![
            r.n.to_string(),
            fmt_g17(r.j_st),
            fmt_g17(r.j_st_se),
            fmt_g17(r.d_lo),
            fmt_g17(r.d_hi),
            fmt_g17(r.tv),
            fmt_opt(r.runtime_ms),
        ]
    });
    write_csv(&dir.join("sweep.csv"), &SWEEP_CSV_HEADER, rows)?;
    write_json(&dir.join("sweep.json"), report)?;
    if report.config.output.dump_samples {
        for (r, d) in report.records.iter().zip(&report.draws) {
            let path = dir.join("samples").join(format!("n{}.csv", r.n));
            write_csv(&path, &["value"], d.iter().map(|&x| vec![fmt_g17(x)]))?;
        }
    }
    Ok(())
}
