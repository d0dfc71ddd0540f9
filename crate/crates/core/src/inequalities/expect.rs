//! Expectations over a joint smoothed density.
//!
//! Small mixtures use a tensor Gauss–Legendre rule on the box spanned by the
//! centers (widened by `half_width * sqrt(tau)`), with the error estimated by
//! re-running a lower-order rule on the same panels. The mass outside the box
//! is handled analytically: every score is bounded by
//! `L(x, y) = (|x| + |y| + S) / tau` with `S = max_i (|s_i| + |t_i|)`, so an
//! integrand with `|g| <= c L^2` contributes at most `c E[L^2; outside]`.
//! Large mixtures fall back to Monte Carlo with a reported standard error.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::joint::{weights_for, JointSmoothedDensity};
use crate::error::{Error, Result};
use crate::lattice::stream_rng;
use crate::quadrature::composite_rule;
use crate::scalar::{lit, normal_outside_moments, Real};
use crate::smoothing::SmoothedDensity;

#[derive(Clone, Debug, Serialize)]
pub struct Quad2dSpec<F> {
    /// Minimum nodes per axis.
    pub nodes: usize,
    pub panel_order: usize,
    /// Lower order used on the same panels for the error estimate.
    pub check_order: usize,
    /// Window half-width beyond the center range, in units of `sqrt(tau)`.
    pub half_width: F,
    /// Cap on nodes per axis.
    pub max_nodes: usize,
    /// Distinct pairs above which Monte Carlo replaces quadrature.
    pub mc_threshold: usize,
    pub mc_draws: usize,
    pub seed: u64,
}

impl<F: Real> Default for Quad2dSpec<F> {
    fn default() -> Self {
        Self {
            nodes: 256,
            panel_order: 16,
            check_order: 12,
            half_width: lit(10.0),
            max_nodes: 4096,
            mc_threshold: 5000,
            mc_draws: 1_000_000,
            seed: 0x5eed,
        }
    }
}

impl<F: Real> Quad2dSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 || self.max_nodes < self.nodes {
            return Err(Error::InvalidArgument("2-D quadrature needs 16 <= nodes <= max_nodes".into()));
        }
        if self.check_order < 2 || self.check_order >= self.panel_order {
            return Err(Error::InvalidArgument("check order must be below the panel order".into()));
        }
        if !(self.half_width >= lit(6.0)) {
            return Err(Error::InvalidArgument("2-D window half-width must be >= 6".into()));
        }
        if self.mc_draws < 1000 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least 1000 draws".into()));
        }
        Ok(())
    }
}

/// Integration region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Region<F> {
    Whole,
    /// `L_B = {|x| <= B sqrt(tau), |y| <= B sqrt(tau)}`.
    Inside(F),
    /// Complement of `L_B`.
    Outside(F),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tensor,
    MonteCarlo,
}

/// Everything an integrand may need at one point.
#[derive(Clone, Copy, Debug)]
pub struct Point2<F> {
    pub x: F,
    pub y: F,
    pub density: F,
    pub rho1: F,
    pub rho2: F,
    pub rho_x: F,
    pub rho_y: F,
    /// Score of the sum model at `sqrt(beta) x + sqrt(1 - beta) y`.
    pub rho_sum: F,
}

#[derive(Clone, Debug, Serialize)]
pub struct Expectations<F> {
    pub values: Vec<F>,
    /// Quadrature error estimate plus tail certificate, or one Monte Carlo standard error.
    pub errors: Vec<F>,
    pub method: Method,
    pub nodes_per_axis: usize,
}

struct Context<'a, F> {
    joint: &'a JointSmoothedDensity<F>,
    sum: SmoothedDensity<F>,
    a: F,
    b: F,
}

impl<F: Real> Context<'_, F> {
    fn point(&self, x: F, y: F, rho_x: F, rho_y: F) -> Point2<F> {
        let e = self.joint.eval_unchecked(x, y);
        Point2 {
            x,
            y,
            density: e.density,
            rho1: e.rho1,
            rho2: e.rho2,
            rho_x,
            rho_y,
            rho_sum: self.sum.score(self.a * x + self.b * y),
        }
    }
}

/// `E[g(X, Y)]` (restricted to `region`) for `K` integrands at once.
///
/// `coeff[k]` must satisfy `|g_k| <= coeff[k] * L^2` (see the module notes);
/// it scales the certified contribution of the discarded tails.
pub fn expect<F: Real, const K: usize>(
    joint: &JointSmoothedDensity<F>,
    beta: F,
    region: Region<F>,
    spec: &Quad2dSpec<F>,
    coeff: [F; K],
    g: impl Fn(&Point2<F>) -> [F; K] + Sync,
) -> Result<Expectations<F>> {
    spec.validate()?;
    let (a, b) = weights_for(beta)?;
    if let Region::Inside(bb) | Region::Outside(bb) = region {
        if !(bb > F::zero()) {
            return Err(Error::InvalidArgument(format!("region parameter B must be positive, got {bb}")));
        }
    }
    let ctx = Context { joint, sum: joint.sum_model(beta)?, a, b };
    if joint.atoms() > spec.mc_threshold {
        return Ok(monte_carlo(&ctx, region, spec, &g));
    }
    let st = joint.tau().sqrt();
    let hw = spec.half_width * st;
    let ((xl, xh), (yl, yh)) = joint.ranges();
    let whole = ((xl - hw, xh + hw), (yl - hw, yh + hw));
    match region {
        Region::Whole => {
            let mut r = tensor(&ctx, whole, spec, &g);
            let tail = tail_certificate(joint, whole);
            for (e, c) in r.errors.iter_mut().zip(coeff) {
                *e = *e + c * tail;
            }
            Ok(r)
        }
        Region::Inside(bb) => {
            let h = bb * st;
            Ok(tensor(&ctx, ((-h, h), (-h, h)), spec, &g))
        }
        Region::Outside(bb) => {
            let mut all = tensor(&ctx, whole, spec, &g);
            let h = bb * st;
            let inner = tensor(&ctx, ((-h, h), (-h, h)), spec, &g);
            let tail = tail_certificate(joint, whole);
            for (k, c) in coeff.iter().enumerate() {
                all.values[k] = all.values[k] - inner.values[k];
                all.errors[k] = all.errors[k] + inner.errors[k] + *c * tail;
            }
            Ok(all)
        }
    }
}

fn panels_for<F: Real>(width: F, tau: F, spec: &Quad2dSpec<F>) -> usize {
    let by_nodes = spec.nodes.div_ceil(spec.panel_order);
    let by_width = crate::scalar::to_f64(width / (lit::<F>(2.0) * tau.sqrt())).ceil() as usize;
    by_nodes.max(by_width).min(spec.max_nodes / spec.panel_order).max(1)
}

fn tensor<F: Real, const K: usize>(
    ctx: &Context<'_, F>,
    ((xl, xh), (yl, yh)): ((F, F), (F, F)),
    spec: &Quad2dSpec<F>,
    g: &(impl Fn(&Point2<F>) -> [F; K] + Sync),
) -> Expectations<F> {
    let tau = ctx.joint.tau();
    let px = panels_for(xh - xl, tau, spec);
    let py = panels_for(yh - yl, tau, spec);
    let run = |order: usize| -> [F; K] {
        let (xn, xw) = composite_rule(xl, xh, px, order);
        let (yn, yw) = composite_rule(yl, yh, py, order);
        let ry: Vec<F> = yn.iter().map(|&y| ctx.joint.marginal_y().score(y)).collect();
        let rows: Vec<[F; K]> = xn
            .par_iter()
            .zip(xw.par_iter())
            .map(|(&x, &wx)| {
                let rx = ctx.joint.marginal_x().score(x);
                let mut acc = [F::zero(); K];
                for ((&y, &wy), &rhoy) in yn.iter().zip(&yw).zip(&ry) {
                    let p = ctx.point(x, y, rx, rhoy);
                    let v = g(&p);
                    let w = wy * p.density;
                    for k in 0..K {
                        acc[k] = acc[k] + w * v[k];
                    }
                }
                acc.map(|s| s * wx)
            })
            .collect();
        let mut total = [F::zero(); K];
        for r in rows {
            for k in 0..K {
                total[k] = total[k] + r[k];
            }
        }
        total
    };
    let hi = run(spec.panel_order);
    let lo = run(spec.check_order);
    Expectations {
        values: hi.to_vec(),
        errors: hi.iter().zip(&lo).map(|(h, l)| (*h - *l).abs()).collect(),
        method: Method::Tensor,
        nodes_per_axis: px.max(py) * spec.panel_order,
    }
}

/// `E[L^2; (X, Y) outside the box]` with `L = (|x| + |y| + S)/tau`.
pub(crate) fn tail_certificate<F: Real>(joint: &JointSmoothedDensity<F>, ((xl, xh), (yl, yh)): ((F, F), (F, F))) -> F {
    let sd = joint.tau().sqrt();
    let spread = joint.spread();
    let mut total = F::zero();
    for (s, t, w) in joint.centers() {
        let (px, _, x2o) = normal_outside_moments(s, sd, xl, xh);
        let (py, _, y2o) = normal_outside_moments(t, sd, yl, yh);
        let x2 = s * s + sd * sd;
        let y2 = t * t + sd * sd;
        // out = {x out} U {y out}; coordinates are independent within a component
        let ex = x2o + x2 * py;
        let ey = y2o + y2 * px;
        total = total + w * (ex + ey + spread * spread * (px + py));
    }
    let tau = joint.tau();
    lit::<F>(3.0) * total / (tau * tau)
}

const MC_CHUNK: usize = 10_000;

fn monte_carlo<F: Real, const K: usize>(
    ctx: &Context<'_, F>,
    region: Region<F>,
    spec: &Quad2dSpec<F>,
    g: &(impl Fn(&Point2<F>) -> [F; K] + Sync),
) -> Expectations<F> {
    let centers: Vec<(F, F, F)> = ctx.joint.centers().collect();
    let mut cumulative = Vec::with_capacity(centers.len());
    let mut acc = 0.0f64;
    for c in &centers {
        acc += crate::scalar::to_f64(c.2);
        cumulative.push(acc);
    }
    let sd = ctx.joint.tau().sqrt();
    let limit = match region {
        Region::Whole => None,
        Region::Inside(bb) | Region::Outside(bb) => Some(bb * sd),
    };
    let chunks = spec.mc_draws.div_ceil(MC_CHUNK);
    // per chunk: (count, mean, sum of squared deviations), combined in chunk order
    let parts: Vec<(f64, [f64; K], [f64; K])> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(spec.seed, c as u64);
            let n = MC_CHUNK.min(spec.mc_draws - c * MC_CHUNK);
            let mut mean = [0.0f64; K];
            let mut m2 = [0.0f64; K];
            for i in 0..n {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cumulative.partition_point(|&v| v <= u).min(centers.len() - 1);
                let (s, t, _) = centers[j];
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x = s + sd * lit::<F>(z1);
                let y = t + sd * lit::<F>(z2);
                let inside = limit.is_none_or(|h| x.abs() <= h && y.abs() <= h);
                let keep = match region {
                    Region::Whole => true,
                    Region::Inside(_) => inside,
                    Region::Outside(_) => !inside,
                };
                let v = if keep {
                    let p = ctx.point(x, y, ctx.joint.marginal_x().score(x), ctx.joint.marginal_y().score(y));
                    g(&p).map(crate::scalar::to_f64)
                } else {
                    [0.0; K]
                };
                let k1 = (i + 1) as f64;
                for k in 0..K {
                    let d = v[k] - mean[k];
                    mean[k] += d / k1;
                    m2[k] += d * (v[k] - mean[k]);
                }
            }
            (n as f64, mean, m2)
        })
        .collect();
    let (mut n, mut mean, mut m2) = (0.0f64, [0.0f64; K], [0.0f64; K]);
    for (nb, mb, m2b) in parts {
        let tot = n + nb;
        for k in 0..K {
            let d = mb[k] - mean[k];
            mean[k] += d * nb / tot;
            m2[k] += m2b[k] + d * d * n * nb / tot;
        }
        n = tot;
    }
    Expectations {
        values: mean.iter().map(|&m| lit(m)).collect(),
        errors: m2.iter().map(|&v| lit((v / (n - 1.0) / n).sqrt())).collect(),
        method: Method::MonteCarlo,
        nodes_per_axis: 0,
    }
}
