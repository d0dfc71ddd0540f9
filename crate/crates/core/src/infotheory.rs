//! Relative entropy to the Gaussian and distance bounds for smoothed models.
//!
//! The de Bruijn route integrates standardized Fisher information along the
//! heat flow. It is written for a model `V0 = U + Z^(tau0)` of arbitrary
//! variance `sigma0^2`:
//!
//! ```text
//! D(V0 || N(mu, sigma0^2)) = 1/2 int_0^inf J_st(V0 + Z^(s)) / (sigma0^2 + s) ds
//! ```
//!
//! With `tau0 = 0` and unit variance this is the classical identity.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureSpec;
use crate::scalar::{lit, normal_log_pdf, std_normal_pdf, std_normal_sf, to_f64, Real};
use crate::smoothing::SmoothedDensity;

fn standardization_tol<F: Real>() -> F {
    lit::<F>(1e-6).max(F::epsilon() * lit(100.0))
}

/// Fails unless the model has mean 0 and variance 1.
pub fn check_standardized<F: Real>(model: &SmoothedDensity<F>) -> Result<()> {
    let tol = standardization_tol::<F>();
    let (m, v) = (model.mean(), model.variance());
    if m.abs() > tol || (v - F::one()).abs() > tol {
        return Err(Error::NotStandardized { mean: to_f64(m), variance: to_f64(v) });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EntropyEstimate<F> {
    /// `D(f || phi)` in nats.
    pub value: F,
    /// Quadrature error estimate plus the bound on the discarded tails.
    pub error: F,
    pub tail_bound: F,
}

/// `D(f || phi) = int f log(f / phi)` for a standardized model.
pub fn relative_entropy_direct<F: Real>(
    model: &SmoothedDensity<F>,
    spec: &QuadratureSpec<F>,
) -> Result<EntropyEstimate<F>> {
    spec.validate()?;
    check_standardized(model)?;
    let one = F::one();
    let integral = model.integrate_window(spec, |u, e| e.density * (e.log_density - normal_log_pdf(u, one)));
    let tol = spec.abs_tol.max(spec.rel_tol * integral.value.abs());
    let integral = integral.require(tol)?;

    // outside the window f - phi <= f log(f/phi) <= f (max(0, -log(tau)/2) + u^2/2)
    let (lo, hi) = model.window(spec.half_width);
    let (m0, _, m2) = model.outside_moments(lo, hi);
    let half = lit::<F>(0.5);
    let level = (-half * model.tau().ln()).max(F::zero());
    let phi_tail = std_normal_sf(hi) + std_normal_sf(-lo);
    let tail = level * m0 + half * m2 + phi_tail;
    Ok(EntropyEstimate { value: integral.value, error: integral.error + tail, tail_bound: tail })
}

/// Grid and tolerance controls for the de Bruijn route.
#[derive(Clone, Debug, Serialize)]
pub struct DeBruijnSpec<F> {
    /// Number of log-spaced added-noise levels.
    pub points: usize,
    /// Smallest added-noise variance on the grid.
    pub s_min: F,
    /// Largest added-noise variance; the remainder is certified, not computed.
    pub t_max: F,
    /// Largest acceptable tail certificate, if any.
    pub tolerance: Option<F>,
    pub quad: QuadratureSpec<F>,
}

impl<F: Real> Default for DeBruijnSpec<F> {
    fn default() -> Self {
        Self { points: 200, s_min: lit(1e-4), t_max: lit(1e3), tolerance: None, quad: QuadratureSpec::default() }
    }
}

impl<F: Real> DeBruijnSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.points < 3 {
            return Err(Error::InvalidArgument("de Bruijn grid needs at least 3 points".into()));
        }
        if !(self.s_min > F::zero() && self.t_max > self.s_min && self.t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < s_min < t_max, got s_min={} t_max={}",
                self.s_min, self.t_max
            )));
        }
        self.quad.validate()
    }

    /// The log-spaced added-noise levels.
    pub fn grid(&self) -> Vec<F> {
        let (a, b) = (self.s_min.ln(), self.t_max.ln());
        let last = lit::<F>((self.points - 1) as f64);
        (0..self.points)
            .map(|k| if k + 1 == self.points { self.t_max } else { (a + (b - a) * lit::<F>(k as f64) / last).exp() })
            .collect()
    }
}

/// de Bruijn estimate of `D` with its error budget.
#[derive(Clone, Debug, Serialize)]
pub struct DeBruijnEstimate<F> {
    /// Trapezoid estimate of the integral over `[s_min, t_max]`.
    pub value: F,
    pub lower: F,
    pub upper: F,
    /// `|T_h - T_2h|` between the full grid and every other point.
    pub discretization: F,
    /// Propagated quadrature errors of the individual Fisher informations.
    pub quadrature_error: F,
    /// Certified bound on the integral over `[t_max, inf)`.
    pub tail_certificate: F,
    /// Bound on the integral over `[0, s_min]`; `None` when the base model has no smoothing.
    pub head_bound: Option<F>,
    /// Sum of all error terms that apply.
    pub certificate: F,
    /// Bandwidth of the model whose entropy is being estimated.
    pub resolved_bandwidth: F,
    pub grid: Vec<F>,
    pub j_st: Vec<F>,
}

fn debruijn_core<F: Real>(base: &SmoothedDensity<F>, tau0: F, spec: &DeBruijnSpec<F>) -> Result<DeBruijnEstimate<F>> {
    spec.validate()?;
    let half = lit::<F>(0.5);
    let var_c = base.center_variance();
    let sigma0 = var_c + tau0;
    let grid = spec.grid();

    let tail = half * ((sigma0 + spec.t_max) / (tau0 + spec.t_max)).ln();
    if let Some(tol) = spec.tolerance {
        if tail > tol {
            return Err(Error::TailCertificate { certificate: to_f64(tail), tolerance: to_f64(tol) });
        }
    }

    let infos: Vec<_> = grid
        .par_iter()
        .map(|&s| base.with_bandwidth(tau0 + s).and_then(|m| m.fisher(&spec.quad)))
        .collect::<Result<Vec<_>>>()?;
    let j_st: Vec<F> = infos.iter().map(|i| i.j_st).collect();

    // trapezoid in log s: int g ds = int g(s) s dlog(s)
    let logs: Vec<F> = grid.iter().map(|s| s.ln()).collect();
    let integrand: Vec<F> = grid.iter().zip(&j_st).map(|(&s, &j)| half * j * s / (sigma0 + s)).collect();
    let errs: Vec<F> = grid.iter().zip(&infos).map(|(&s, i)| half * i.error * s).collect();
    let value = crate::quadrature::trapezoid(&logs, &integrand);
    let quadrature_error = crate::quadrature::trapezoid(&logs, &errs);

    let mut coarse: Vec<usize> = (0..grid.len()).step_by(2).collect();
    if *coarse.last().unwrap() != grid.len() - 1 {
        coarse.push(grid.len() - 1);
    }
    let cx: Vec<F> = coarse.iter().map(|&i| logs[i]).collect();
    let cy: Vec<F> = coarse.iter().map(|&i| integrand[i]).collect();
    let discretization = (value - crate::quadrature::trapezoid(&cx, &cy)).abs();

    let (head_bound, resolved_bandwidth) =
        if tau0 > F::zero() { (Some(half * spec.s_min * var_c / (tau0 * sigma0)), tau0) } else { (None, spec.s_min) };
    let certificate = discretization + quadrature_error + tail + head_bound.unwrap_or(F::zero());
    Ok(DeBruijnEstimate {
        value,
        lower: (value - discretization - quadrature_error).max(F::zero()),
        upper: value + certificate,
        discretization,
        quadrature_error,
        tail_certificate: tail,
        head_bound,
        certificate,
        resolved_bandwidth,
        grid,
        j_st,
    })
}

/// de Bruijn route for the raw centers of `samples` (no initial smoothing).
///
/// The integral cannot reach zero bandwidth for atomic samples, so the
/// estimate targets the model smoothed at `s_min`; see
/// [`DeBruijnEstimate::resolved_bandwidth`].
pub fn relative_entropy_debruijn<F: Real>(centers: &[F], spec: &DeBruijnSpec<F>) -> Result<DeBruijnEstimate<F>> {
    let base = SmoothedDensity::new(centers, spec.s_min)?;
    debruijn_core(&base, F::zero(), spec)
}

/// de Bruijn route for an already smoothed model, targeting `D` of that model.
pub fn relative_entropy_debruijn_model<F: Real>(
    model: &SmoothedDensity<F>,
    spec: &DeBruijnSpec<F>,
) -> Result<DeBruijnEstimate<F>> {
    debruijn_core(model, model.tau(), spec)
}

/// Distances from a standardized model to the standard normal, with Shimizu's bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GaussianDistances<F> {
    /// `int |f - phi|`.
    pub tv: F,
    pub tv_error: F,
    /// `max |f - phi|` on a uniform grid over the integration window.
    pub sup: F,
    pub j_st: F,
    pub j_st_error: F,
    /// `4 sqrt(3) sqrt(J_st)`.
    pub tv_bound: F,
    /// `(1 + sqrt(6/pi)) sqrt(J_st)`.
    pub sup_bound: F,
    pub tv_holds: bool,
    pub sup_holds: bool,
}

/// Points in the uniform grid used for the sup distance.
pub const SUP_GRID_POINTS: usize = 4001;

pub fn gaussian_distances<F: Real>(
    model: &SmoothedDensity<F>,
    spec: &QuadratureSpec<F>,
) -> Result<GaussianDistances<F>> {
    spec.validate()?;
    check_standardized(model)?;
    let integral = model.integrate_window(spec, |u, e| (e.density - std_normal_pdf(u)).abs());
    let integral = integral.require(spec.abs_tol.max(spec.rel_tol * integral.value.abs()))?;
    let (lo, hi) = model.window(spec.half_width);
    let tail = model.outside_moments(lo, hi).0 + std_normal_sf(hi) + std_normal_sf(-lo);
    let tv_error = integral.error + tail;

    let steps = lit::<F>((SUP_GRID_POINTS - 1) as f64);
    let sup = (0..SUP_GRID_POINTS)
        .map(|k| {
            let u = lo + (hi - lo) * lit::<F>(k as f64) / steps;
            (model.density(u) - std_normal_pdf(u)).abs()
        })
        .fold(F::zero(), F::max);

    let fisher = model.fisher(spec)?;
    let root = fisher.j_st.max(F::zero()).sqrt();
    // slack in the root from the Fisher error, |d sqrt(x)| <= sqrt(|dx|)
    let root_err = fisher.error.sqrt();
    let tv_bound = lit::<F>(4.0 * 3f64.sqrt()) * root;
    let sup_bound = lit::<F>(1.0 + (6.0 / std::f64::consts::PI).sqrt()) * root;
    Ok(GaussianDistances {
        tv: integral.value,
        tv_error,
        sup,
        j_st: fisher.j_st,
        j_st_error: fisher.error,
        tv_bound,
        sup_bound,
        tv_holds: integral.value <= tv_bound + lit::<F>(4.0 * 3f64.sqrt()) * root_err + tv_error,
        sup_holds: sup <= sup_bound + lit::<F>(1.0 + (6.0 / std::f64::consts::PI).sqrt()) * root_err,
    })
}
