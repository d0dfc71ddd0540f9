//! Distance of a function from the affine functions in `L^2(N(0, tau/2))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadratureSpec};
use crate::scalar::{lit, std_normal_pdf, to_f64, Real};
use crate::smoothing::SmoothedDensity;

#[derive(Clone, Debug, Serialize)]
pub struct ThetaSeminorm<F> {
    /// Variance of the reference Gaussian, `tau / 2`.
    pub reference_variance: F,
    /// `E f(Z)^2`.
    pub second_moment: F,
    /// Slope of the best affine fit.
    pub a: F,
    /// Intercept of the best affine fit, `E f(Z)`.
    pub b: F,
    /// `E (f(Z) - a Z - b)^2`.
    pub residual: F,
    pub error: F,
}

/// Best affine approximation of `f` under `Z ~ N(0, tau / 2)`.
pub fn theta_seminorm<F: Real>(f: impl Fn(F) -> F, tau: F, spec: &QuadratureSpec<F>) -> Result<ThetaSeminorm<F>> {
    spec.validate()?;
    if !(tau > F::zero()) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let var = tau / lit(2.0);
    let sd = var.sqrt();
    let h = spec.half_width;
    // integrate in standard units so the panel size does not depend on tau
    let moment = |g: &dyn Fn(F, F) -> F| integrate(|u| g(u * sd, f(u * sd)) * std_normal_pdf(u), -h, h, F::one(), spec);
    let mean = moment(&|_, v| v);
    let slope = moment(&|z, v| v * z);
    let b = mean.value;
    let a = slope.value / var;
    let second = moment(&|_, v| v * v);
    let resid = moment(&|z, v| (v - a * z - b).powi(2));
    let error = resid.error + second.error;
    for r in [&mean, &slope, &second, &resid] {
        if !r.converged {
            return Err(Error::Quadrature { requested: to_f64(spec.abs_tol), achieved: to_f64(r.error) });
        }
    }
    Ok(ThetaSeminorm { reference_variance: var, second_moment: second.value, a, b, residual: resid.value, error })
}

/// Seminorm of the score of `model` at reference bandwidth `model.tau() / 2`.
pub fn theta_of_score<F: Real>(model: &SmoothedDensity<F>, spec: &QuadratureSpec<F>) -> Result<ThetaSeminorm<F>> {
    theta_seminorm(|z| model.score(z), model.tau(), spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn affine_has_zero_residual() {
        let t = theta_seminorm(|z: f64| 3.0 - 2.0 * z, 1.4, &QuadratureSpec::default()).unwrap();
        assert_abs_diff_eq!(t.residual, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.a, -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(t.b, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn square_matches_hermite_algebra() {
        for tau in [0.5, 1.0, 3.0] {
            let t = theta_seminorm(|z: f64| z * z, tau, &QuadratureSpec::default()).unwrap();
            let v = tau / 2.0;
            assert_abs_diff_eq!(t.residual, 2.0 * v * v, epsilon = 1e-10);
            assert_abs_diff_eq!(t.second_moment, 3.0 * v * v, epsilon = 1e-10);
        }
    }
}
