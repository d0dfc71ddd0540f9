//! Numerical audits of the individual score and density bounds.

use rayon::prelude::*;
use serde::Serialize;

use super::constants::{
    c_tau_k, density_difference_bound, derivative_difference_bound_paper, derivative_difference_bound_sharp, f1, f2,
    f3, f4, f5, score_moment_bound,
};
use super::decomposition::COVARIANCE_FLOOR;
use super::expect::{expect, Quad2dSpec, Region};
use super::hoeffding::hoeffding_integrals;
use super::joint::{weights_for, JointSmoothedDensity};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::scalar::{lit, log_sum_exp, normal_log_pdf, Real};
use crate::smoothing::SmoothedDensity;

fn check_b<F: Real>(b: F) -> Result<()> {
    if !(b >= F::one()) || !b.is_finite() {
        return Err(Error::InvalidArgument(format!("B must be finite and >= 1, got {b}")));
    }
    Ok(())
}

fn uniform_grid<F: Real>(lo: F, hi: F, n: usize) -> Vec<F> {
    let steps = lit::<F>((n.max(2) - 1) as f64);
    (0..n.max(2)).map(|i| lo + (hi - lo) * lit::<F>(i as f64) / steps).collect()
}

fn ratio<F: Real>(lhs: F, bound: F) -> Option<F> {
    (bound > F::zero()).then(|| lhs / bound)
}

/// Density-difference bounds on `L_B` and the inside part of the M-term.
#[derive(Clone, Debug, Serialize)]
pub struct FactorizationAudit<F> {
    pub b: F,
    pub beta: F,
    pub grid_points: usize,
    pub covariance: F,
    pub k_bound: F,
    /// `max |p - p_X p_Y|` over the grid.
    pub max_density_difference: F,
    /// `max |p^(1) - p'_X p_Y|`.
    pub max_dx_difference: F,
    /// `max |p^(2) - p_X p'_Y|`.
    pub max_dy_difference: F,
    pub density_bound: F,
    pub derivative_bound_paper: F,
    pub derivative_bound_sharp: F,
    /// Ratios to the bounds; `None` when the covariance is below the floor.
    pub ratio_density: Option<F>,
    pub ratio_dx_paper: Option<F>,
    pub ratio_dy_paper: Option<F>,
    pub ratio_dx_sharp: Option<F>,
    pub ratio_dy_sharp: Option<F>,
    /// `int H` of the center law (equals the covariance).
    pub hoeffding_integral: Option<F>,
    /// `2 int H_- / Cov`: the ratios can exceed one by at most this much.
    pub noise_allowance: Option<F>,
    /// `E M_{a,b} rho~ I(L_B)`.
    pub m_term_inside: F,
    pub m_term_error: F,
    /// `f_2 (a + b) B^4 Cov`.
    pub m_term_bound: F,
    /// `min p(x,y) / (phi_{tau/2}(x) phi_{tau/2}(y))` over the grid.
    pub density_floor_ratio: F,
    /// Any density ratio (published constants) above `1 + noise_allowance`.
    pub flagged: bool,
}

/// Checks the density-difference bounds on an `n x n` grid over `L_B`.
pub fn factorization_bounds<F: Real>(
    joint: &JointSmoothedDensity<F>,
    b: F,
    beta: F,
    k_bound: Option<F>,
    n: usize,
    spec: &Quad2dSpec<F>,
) -> Result<FactorizationAudit<F>> {
    check_b(b)?;
    let (a, c) = weights_for(beta)?;
    let tau = joint.tau();
    let cov = joint.covariance();
    let k_bound = k_bound.unwrap_or_else(|| joint.second_moment());
    let h = b * tau.sqrt();
    let grid = uniform_grid(-h, h, n);
    let half_tau = tau / lit(2.0);
    let mx = joint.marginal_x();
    let my = joint.marginal_y();
    let ey: Vec<_> = grid.iter().map(|&y| my.eval_unchecked(y)).collect();

    let rows: Vec<[F; 4]> = grid
        .par_iter()
        .map(|&x| {
            let ex = mx.eval_unchecked(x);
            let mut acc = [F::zero(), F::zero(), F::zero(), F::infinity()];
            for (&y, eyv) in grid.iter().zip(&ey) {
                let e = joint.eval_unchecked(x, y);
                let p = e.density;
                acc[0] = acc[0].max((p - ex.density * eyv.density).abs());
                acc[1] = acc[1].max((p * e.rho1 - ex.derivative * eyv.density).abs());
                acc[2] = acc[2].max((p * e.rho2 - ex.density * eyv.derivative).abs());
                let floor = e.log_density - normal_log_pdf(x, half_tau) - normal_log_pdf(y, half_tau);
                acc[3] = acc[3].min(floor.exp());
            }
            acc
        })
        .collect();
    let mut worst = [F::zero(), F::zero(), F::zero(), F::infinity()];
    for r in rows {
        for k in 0..3 {
            worst[k] = worst[k].max(r[k]);
        }
        worst[3] = worst[3].min(r[3]);
    }

    let positive = cov >= lit(COVARIANCE_FLOOR);
    let hoeff = hoeffding_integrals(joint);
    let noise_allowance = hoeff.filter(|_| positive).map(|hh| lit::<F>(2.0) * hh.negative_part / cov);
    let density_bound = density_difference_bound(tau, cov);
    let paper = derivative_difference_bound_paper(tau, cov);
    let sharp = derivative_difference_bound_sharp(tau, cov);
    let pick = |lhs: F, bound: F| if positive { ratio(lhs, bound) } else { None };
    let ratio_density = pick(worst[0], density_bound);
    let ratio_dx_paper = pick(worst[1], paper);
    let ratio_dy_paper = pick(worst[2], paper);

    let inside = expect(joint, beta, Region::Inside(b), spec, [lit(4.0)], |p| {
        [(a * (p.rho1 - p.rho_x) + c * (p.rho2 - p.rho_y)) * p.rho_sum]
    })?;
    let limit = F::one() + noise_allowance.unwrap_or(F::zero());
    let flagged = [ratio_density, ratio_dx_paper, ratio_dy_paper].iter().flatten().any(|&r| r > limit);
    Ok(FactorizationAudit {
        b,
        beta,
        grid_points: grid.len() * grid.len(),
        covariance: cov,
        k_bound,
        max_density_difference: worst[0],
        max_dx_difference: worst[1],
        max_dy_difference: worst[2],
        density_bound,
        derivative_bound_paper: paper,
        derivative_bound_sharp: sharp,
        ratio_density,
        ratio_dx_paper,
        ratio_dy_paper,
        ratio_dx_sharp: pick(worst[1], sharp),
        ratio_dy_sharp: pick(worst[2], sharp),
        hoeffding_integral: hoeff.map(|hh| hh.integral),
        noise_allowance,
        m_term_inside: inside.values[0],
        m_term_error: inside.errors[0],
        m_term_bound: f2(tau, k_bound) * (a + c) * b.powi(4) * cov.max(F::zero()),
        density_floor_ratio: worst[3],
        flagged,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct PointwiseCheck<F> {
    pub k: u32,
    pub c_tau_k: F,
    /// `max p |rho|^k / (c p^(2 tau))` over the grid.
    pub max_ratio: F,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentCheck<F> {
    pub k: u32,
    /// `(E |rho|^k)^{1/k}`.
    pub moment: F,
    pub bound: F,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BodyCheck<F> {
    pub b: F,
    /// `int_{|u| <= B sqrt(tau)} rho(u)^2 du`.
    pub integral: F,
    /// `f_1(tau, K) B^3`.
    pub bound: F,
    pub holds: bool,
    /// `B <= 1`, where the bound is not claimed.
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentAudit<F> {
    pub tau: F,
    pub k_bound: F,
    pub grid_points: usize,
    pub pointwise: Vec<PointwiseCheck<F>>,
    pub moments: Vec<MomentCheck<F>>,
    pub body: Vec<BodyCheck<F>>,
}

impl<F: Real> MomentAudit<F> {
    pub fn all_hold(&self) -> bool {
        self.pointwise.iter().all(|c| c.holds)
            && self.moments.iter().all(|c| c.holds)
            && self.body.iter().filter(|c| !c.flagged).all(|c| c.holds)
    }
}

/// Tail and body bounds on the score of a one-dimensional smoothed model.
pub fn moment_bound_audit<F: Real>(
    model: &SmoothedDensity<F>,
    ks: &[u32],
    bs: &[F],
    k_bound: Option<F>,
    grid_points: usize,
    spec: &QuadratureSpec<F>,
) -> Result<MomentAudit<F>> {
    spec.validate()?;
    if let Some(&k) = ks.iter().find(|&&k| k < 2 || k % 2 == 1) {
        return Err(Error::InvalidArgument(format!("moment orders must be even and >= 2, got {k}")));
    }
    let tau = model.tau();
    let k_bound = k_bound.unwrap_or_else(|| model.center_variance() + model.mean() * model.mean());
    let wide = model.with_bandwidth(tau + tau)?;
    let (lo, hi) = model.window(spec.half_width);
    let grid = uniform_grid(lo, hi, grid_points);
    let tol = lit::<F>(1e-10);

    let mut pointwise = Vec::new();
    let mut moments = Vec::new();
    for &k in ks {
        let kf = lit::<F>(k as f64);
        let c = c_tau_k(tau, kf);
        let max_ratio = grid
            .iter()
            .map(|&u| {
                let e = model.eval_unchecked(u);
                if e.score == F::zero() {
                    return F::zero();
                }
                (e.log_density + kf * e.score.abs().ln() - c.ln() - wide.log_density(u)).exp()
            })
            .fold(F::zero(), F::max);
        pointwise.push(PointwiseCheck { k, c_tau_k: c, max_ratio, holds: max_ratio <= F::one() + tol });

        let m = model.integrate_window(spec, |_, e| e.density * e.score.abs().powi(k as i32));
        let moment = m.value.powf(F::one() / kf);
        let bound = score_moment_bound(tau, kf);
        moments.push(MomentCheck { k, moment, bound, holds: moment <= bound * (F::one() + tol) });
    }

    let body = bs
        .iter()
        .map(|&b| {
            let h = b * tau.sqrt();
            let r = integrate(|u| model.score(u).powi(2), -h, h, tau.sqrt(), spec);
            let bound = f1(tau, k_bound) * b.powi(3);
            BodyCheck { b, integral: r.value, bound, holds: r.value <= bound, flagged: b <= F::one() }
        })
        .collect();
    Ok(MomentAudit { tau, k_bound, grid_points: grid.len(), pointwise, moments, body })
}

#[derive(Clone, Debug, Serialize)]
pub struct OffRegionCheck<F> {
    pub b: F,
    /// `E |M_{a,b} rho~| I(not L_B)`.
    pub value: F,
    pub error: F,
    /// `(a + b) f_3 / B^{2 - eps}`.
    pub bound: F,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JointPointwiseCheck<F> {
    pub k: u32,
    pub c_tau_k: F,
    /// `max p |rho^(1)|^k / (c q)` with `q` smoothed at `2 tau` along the differentiated axis only.
    pub max_ratio: F,
    pub holds: bool,
    /// The same ratio against the density smoothed at `2 tau` along both axes.
    /// Can reach `sqrt(2)`: `phi_tau(v) <= sqrt(2) phi_{2 tau}(v)` is attained at `v = 0`.
    pub literal_ratio: F,
    pub literal_holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JointMomentAudit<F> {
    pub rho1: Vec<JointPointwiseCheck<F>>,
    pub rho2: Vec<JointPointwiseCheck<F>>,
    pub off_region: Vec<OffRegionCheck<F>>,
    /// Least-squares slope of `-log value` against `log B`.
    pub decay_exponent: Option<F>,
    /// The exponent guaranteed by the bound, `2 - eps`.
    pub claimed_exponent: F,
}

/// Pointwise joint score bounds and the off-region decay of the M-term.
#[allow(clippy::too_many_arguments)]
pub fn joint_moment_audit<F: Real>(
    joint: &JointSmoothedDensity<F>,
    ks: &[u32],
    bs: &[F],
    beta: F,
    epsilon: F,
    k_bound: Option<F>,
    n: usize,
    spec: &Quad2dSpec<F>,
) -> Result<JointMomentAudit<F>> {
    let (a, c) = weights_for(beta)?;
    let tau = joint.tau();
    let k_bound = k_bound.unwrap_or_else(|| joint.second_moment());
    let wide = joint.with_bandwidth(tau + tau)?;
    let ((xl, xh), (yl, yh)) = joint.ranges();
    let hw = lit::<F>(8.0) * tau.sqrt();
    let gx = uniform_grid(xl - hw, xh + hw, n);
    let gy = uniform_grid(yl - hw, yh + hw, n);
    let tol = lit::<F>(1e-10);

    let atoms: Vec<(F, F, F)> = joint.centers().collect();
    let two_tau = tau + tau;
    let mut rho1 = Vec::new();
    let mut rho2 = Vec::new();
    for &k in ks {
        let kf = lit::<F>(k as f64);
        let cst = c_tau_k(tau, kf);
        let checks = gx
            .par_iter()
            .map(|&x| {
                let mut acc = [F::zero(); 4];
                for &y in &gy {
                    let e = joint.eval_unchecked(x, y);
                    let base = e.log_density - cst.ln();
                    let both = wide.eval_unchecked(x, y).log_density;
                    let along_x = log_mixture(&atoms, x, y, two_tau, tau);
                    let along_y = log_mixture(&atoms, x, y, tau, two_tau);
                    if e.rho1 != F::zero() {
                        let l = base + kf * e.rho1.abs().ln();
                        acc[0] = acc[0].max((l - along_x).exp());
                        acc[2] = acc[2].max((l - both).exp());
                    }
                    if e.rho2 != F::zero() {
                        let l = base + kf * e.rho2.abs().ln();
                        acc[1] = acc[1].max((l - along_y).exp());
                        acc[3] = acc[3].max((l - both).exp());
                    }
                }
                acc
            })
            .reduce(|| [F::zero(); 4], |p, q| [p[0].max(q[0]), p[1].max(q[1]), p[2].max(q[2]), p[3].max(q[3])]);
        let check = |m: F, literal: F| JointPointwiseCheck {
            k,
            c_tau_k: cst,
            max_ratio: m,
            holds: m <= F::one() + tol,
            literal_ratio: literal,
            literal_holds: literal <= F::one() + tol,
        };
        rho1.push(check(checks[0], checks[2]));
        rho2.push(check(checks[1], checks[3]));
    }

    let f3v = f3(tau, k_bound, epsilon);
    let mut off_region = Vec::new();
    for &b in bs {
        check_b(b)?;
        let r = expect(joint, beta, Region::Outside(b), spec, [lit(4.0)], |p| {
            [((a * (p.rho1 - p.rho_x) + c * (p.rho2 - p.rho_y)) * p.rho_sum).abs()]
        })?;
        let bound = (a + c) * f3v / b.powf(lit::<F>(2.0) - epsilon);
        off_region.push(OffRegionCheck {
            b,
            value: r.values[0],
            error: r.errors[0],
            bound,
            holds: r.values[0] <= bound + r.errors[0],
        });
    }
    let pts: Vec<(f64, f64)> = off_region
        .iter()
        .filter(|o| o.value > o.error && o.value > F::zero())
        .map(|o| (crate::scalar::to_f64(o.b).ln(), -crate::scalar::to_f64(o.value).ln()))
        .collect();
    let decay_exponent = slope(&pts).map(lit);
    Ok(JointMomentAudit { rho1, rho2, off_region, decay_exponent, claimed_exponent: lit::<F>(2.0) - epsilon })
}

/// `log sum_i w_i phi_{tx}(x - s_i) phi_{ty}(y - t_i)`.
fn log_mixture<F: Real>(atoms: &[(F, F, F)], x: F, y: F, tx: F, ty: F) -> F {
    let terms: Vec<F> =
        atoms.iter().map(|&(s, t, w)| w.ln() + normal_log_pdf(x - s, tx) + normal_log_pdf(y - t, ty)).collect();
    log_sum_exp(&terms)
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[derive(Clone, Debug, Serialize)]
pub struct ProductAudit<F> {
    pub b: F,
    /// `E rho_X(X) rho_Y(Y)`.
    pub value: F,
    pub error: F,
    pub covariance: F,
    pub f4: F,
    pub f5: F,
    /// `f_4 B^4 Cov + f_5 / B^2`.
    pub bound: F,
    pub slack: F,
    pub holds: bool,
}

/// Checks `E rho_X rho_Y <= f_4 B^4 Cov + f_5 / B^2`.
pub fn product_term_audit<F: Real>(
    joint: &JointSmoothedDensity<F>,
    b: F,
    k_bound: Option<F>,
    spec: &Quad2dSpec<F>,
) -> Result<ProductAudit<F>> {
    check_b(b)?;
    let tau = joint.tau();
    let k_bound = k_bound.unwrap_or_else(|| joint.second_moment());
    let r = expect(joint, lit(0.5), Region::Whole, spec, [F::one()], |p| [p.rho_x * p.rho_y])?;
    let cov = joint.covariance();
    let f4v = f4(tau, k_bound);
    let f5v = f5(tau, k_bound, joint.fourth_moment());
    let bound = f4v * b.powi(4) * cov.max(F::zero()) + f5v / (b * b);
    let value = r.values[0];
    Ok(ProductAudit {
        b,
        value,
        error: r.errors[0],
        covariance: cov,
        f4: f4v,
        f5: f5v,
        bound,
        slack: bound - value,
        holds: value <= bound + r.errors[0],
    })
}
