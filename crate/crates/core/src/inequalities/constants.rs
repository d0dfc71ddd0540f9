//! Explicit constants of the score and density bounds.
//!
//! `tau` is the smoothing variance and `k_bound` bounds the second moments of
//! the unsmoothed variables. Where a published constant is too small the
//! sharp value is provided alongside it.

use serde::Serialize;

use crate::scalar::{lit, Real};

/// `c_{tau,k} = sqrt(2) (2k/(tau e))^{k/2}`, so that `(u/tau)^k phi_tau(u) <= c phi_{2 tau}(u)`.
pub fn c_tau_k<F: Real>(tau: F, k: F) -> F {
    F::SQRT_2() * (lit::<F>(2.0) * k / (tau * F::E())).powf(k / lit(2.0))
}

/// Bound on `(E |rho|^k)^{1/k}`: `sqrt(2^{1/k} 2k / (tau e))`.
pub fn score_moment_bound<F: Real>(tau: F, k: F) -> F {
    (lit::<F>(2.0).powf(F::one() / k) * lit::<F>(2.0) * k / (tau * F::E())).sqrt()
}

/// `f_1(tau, K) = (8 / (sqrt(tau) e)) (3 + 2K/tau)`; bounds `int_{|u| <= B sqrt(tau)} rho^2` by `f_1 B^3`.
pub fn f1<F: Real>(tau: F, k_bound: F) -> F {
    lit::<F>(8.0) / (tau.sqrt() * F::E()) * (lit::<F>(3.0) + lit::<F>(2.0) * k_bound / tau)
}

/// Bound on `|p_{X,Y} - p_X p_Y|`: `Cov / (2 pi tau^2 e)`.
pub fn density_difference_bound<F: Real>(tau: F, cov: F) -> F {
    cov / (F::TAU() * tau * tau * F::E())
}

/// Published bound on the derivative differences: `Cov / (pi tau^{5/2} e^2)`.
pub fn derivative_difference_bound_paper<F: Real>(tau: F, cov: F) -> F {
    cov / (F::PI() * tau.powf(lit(2.5)) * F::E() * F::E())
}

/// Sharp bound on the derivative differences: `Cov e^{-1/2} / (2 pi tau^{5/2})`.
///
/// `sup |phi_tau''| = 1 / (tau sqrt(2 pi tau))` is attained at the origin,
/// which makes this about 2.24 times the published value.
pub fn derivative_difference_bound_sharp<F: Real>(tau: F, cov: F) -> F {
    cov * (-lit::<F>(0.5)).exp() / (F::TAU() * tau.powf(lit(2.5)))
}

/// `f_2(tau, K)` with `E M rho~ I(L_B) <= f_2 (a + b) B^4 Cov` for `a^2 + b^2 = 1`, `B >= 1`.
///
/// Assembled with the sharp derivative constant. The sum variable has
/// variance at most `2K`, so its score integral uses `f_1(tau, 2K)`.
pub fn f2<F: Real>(tau: F, k_bound: F) -> F {
    let two = lit::<F>(2.0);
    let f1x = f1(tau, k_bound);
    let f1s = f1(tau, two * k_bound);
    let c = lit::<F>(4.0) * F::SQRT_2();
    let derivative_part = (-lit::<F>(0.5)).exp() * c * f1s.sqrt() / (F::TAU() * tau.powf(lit(1.75)));
    let density_part = c * (f1x * f1s).sqrt() / (F::TAU() * F::E() * tau.powf(lit(1.5)));
    derivative_part + density_part
}

/// Hölder exponents `(p, q)` with `1/p = 1 - eps/2`, `q = 2/eps`.
pub fn holder_pair<F: Real>(eps: F) -> (F, F) {
    let two = lit::<F>(2.0);
    (F::one() / (F::one() - eps / two), two / eps)
}

/// `f_3(tau, K, eps)` with `E M rho~ I(not L_B) <= (a + b) f_3 / B^{2 - eps}`.
///
/// Uses `P((U, V) not in L_B) <= 2 (K + 2 tau) / (B^2 tau)` for the
/// `2 tau`-smoothed pair.
pub fn f3<F: Real>(tau: F, k_bound: F, eps: F) -> F {
    let two = lit::<F>(2.0);
    let (p, q) = holder_pair(eps);
    let holder = two * F::SQRT_2() * (p * q).sqrt() / (tau * F::E());
    two * holder * two * (two + k_bound / tau)
}

/// `f_4(tau, K) = f_1 / (pi e tau^{3/2})`.
pub fn f4<F: Real>(tau: F, k_bound: F) -> F {
    f1(tau, k_bound) / (F::PI() * F::E() * tau.powf(lit(1.5)))
}

/// `f_5 = 16 * 2^{1/4} sqrt(2 (M4 + 6 K tau + 3 tau^2)) / (e tau^2)`.
///
/// `m4_bound` bounds the fourth moments of the unsmoothed variables.
pub fn f5<F: Real>(tau: F, k_bound: F, m4_bound: F) -> F {
    let x4 = m4_bound + lit::<F>(6.0) * k_bound * tau + lit::<F>(3.0) * tau * tau;
    lit::<F>(16.0) * lit::<F>(2.0).powf(lit(0.25)) * (lit::<F>(2.0) * x4).sqrt() / (F::E() * tau * tau)
}

/// All constants for one `(tau, K, M4, eps)`.
#[derive(Clone, Debug, Serialize)]
pub struct Constants<F> {
    pub tau: F,
    pub k_bound: F,
    pub m4_bound: F,
    pub epsilon: F,
    /// `(k, c_{tau,k})` for the requested `k`.
    pub c_tau_k: Vec<(u32, F)>,
    pub f1: F,
    /// `f_1(tau, 2K)`, used for the score of the weighted sum.
    pub f1_sum: F,
    pub f2: F,
    pub f3: F,
    pub f4: F,
    pub f5: F,
    pub holder_p: F,
    pub holder_q: F,
}

impl<F: Real> Constants<F> {
    pub fn new(tau: F, k_bound: F, m4_bound: F, epsilon: F, ks: &[u32]) -> Self {
        let (holder_p, holder_q) = holder_pair(epsilon);
        Self {
            tau,
            k_bound,
            m4_bound,
            epsilon,
            c_tau_k: ks.iter().map(|&k| (k, c_tau_k(tau, lit(k as f64)))).collect(),
            f1: f1(tau, k_bound),
            f1_sum: f1(tau, lit::<F>(2.0) * k_bound),
            f2: f2(tau, k_bound),
            f3: f3(tau, k_bound, epsilon),
            f4: f4(tau, k_bound),
            f5: f5(tau, k_bound, m4_bound),
            holder_p,
            holder_q,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn c_tau_k_dominates_on_a_fine_grid() {
        for &tau in &[0.3f64, 1.0, 2.5] {
            for &k in &[1.0f64, 2.0, 3.5, 4.0, 8.0] {
                let c = c_tau_k(tau, k);
                for i in -4000..=4000 {
                    let u = i as f64 * 0.005 * tau.sqrt();
                    let lhs =
                        (u / tau).abs().powf(k) * (-u * u / (2.0 * tau)).exp() / (std::f64::consts::TAU * tau).sqrt();
                    let rhs = c * (-u * u / (4.0 * tau)).exp() / (std::f64::consts::TAU * 2.0 * tau).sqrt();
                    assert!(lhs <= rhs * (1.0 + 1e-12), "tau={tau} k={k} u={u}");
                }
            }
        }
    }

    #[test]
    fn sharp_derivative_constant_is_attained() {
        // sup_u |phi''_tau(u)| sup_v |phi'_tau(v)|
        let tau = 0.7f64;
        let phi = |u: f64| (-u * u / (2.0 * tau)).exp() / (std::f64::consts::TAU * tau).sqrt();
        let d1 = (1.0 / tau.sqrt()) * phi(tau.sqrt());
        let d2 = phi(0.0) / tau;
        assert_relative_eq!(d1 * d2, derivative_difference_bound_sharp(tau, 1.0), max_relative = 1e-14);
        assert!(derivative_difference_bound_sharp(tau, 1.0) > derivative_difference_bound_paper(tau, 1.0));
    }

    #[test]
    fn closed_forms() {
        assert_relative_eq!(
            c_tau_k(1.0f64, 4.0),
            2f64.sqrt() * (8.0 / std::f64::consts::E).powi(2),
            max_relative = 1e-14
        );
        assert_relative_eq!(f1(1.0f64, 1.0), 40.0 / std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(
            score_moment_bound(1.0f64, 2.0),
            (2f64.sqrt() * 4.0 / std::f64::consts::E).sqrt(),
            max_relative = 1e-14
        );
    }
}
