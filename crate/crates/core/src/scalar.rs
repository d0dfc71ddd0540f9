//! Scalar abstraction shared by the smoothing, information and inequality modules.
//!
//! Everything numerical is written against [`Real`], which both `f32` and `f64`
//! satisfy. Special functions (`erfc`) and quadrature nodes are evaluated in
//! `f64` and narrowed, which is exact for `f64` and more than accurate enough
//! for `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::Serialize;

/// Floating point scalar usable throughout the crate.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Serialize + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Sum
        + Serialize
        + Send
        + Sync
        + 'static
{
}

/// Converts an `f64` literal into `F`.
#[inline]
pub fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf<F: Real>(x: F) -> F {
    let half = lit::<F>(0.5);
    (-(half * x * x)).exp() / (F::TAU()).sqrt()
}

/// Log of the N(0, var) density.
#[inline]
pub fn normal_log_pdf<F: Real>(x: F, var: F) -> F {
    let half = lit::<F>(0.5);
    -(half * x * x / var) - half * (F::TAU() * var).ln()
}

/// Upper tail `P(Z >= x)` of the standard normal, accurate far into the tail.
#[inline]
pub fn std_normal_sf<F: Real>(x: F) -> F {
    lit(0.5 * libm::erfc(to_f64(x) / std::f64::consts::SQRT_2))
}

/// Standard normal CDF.
#[inline]
pub fn std_normal_cdf<F: Real>(x: F) -> F {
    std_normal_sf(-x)
}

/// Partial moments of `Y ~ N(mean, sd^2)` over the half line `Y >= a`.
///
/// Returns `(P(Y >= a), E[Y; Y >= a], E[Y^2; Y >= a])`.
pub fn normal_upper_partial_moments<F: Real>(mean: F, sd: F, a: F) -> (F, F, F) {
    let alpha = (a - mean) / sd;
    let q = std_normal_sf(alpha);
    let phi = if alpha.is_finite() { std_normal_pdf(alpha) } else { F::zero() };
    let az = if alpha.is_finite() { alpha * phi } else { F::zero() };
    let m0 = q;
    let m1 = mean * q + sd * phi;
    let m2 = mean * mean * q + lit::<F>(2.0) * mean * sd * phi + sd * sd * (az + q);
    (m0, m1, m2)
}

/// Partial moments of `Y ~ N(mean, sd^2)` outside the interval `[lo, hi]`.
///
/// Returns `(P, E[Y; out], E[Y^2; out])`.
pub fn normal_outside_moments<F: Real>(mean: F, sd: F, lo: F, hi: F) -> (F, F, F) {
    let (u0, u1, u2) = normal_upper_partial_moments(mean, sd, hi);
    // Y <= lo  <=>  -Y >= -lo
    let (l0, l1, l2) = normal_upper_partial_moments(-mean, sd, -lo);
    (u0 + l0, u1 - l1, u2 + l2)
}

/// `log(sum_i exp(x_i))` over a slice, stable for large magnitudes.
pub fn log_sum_exp<F: Real>(xs: &[F]) -> F {
    let m = xs.iter().copied().fold(F::neg_infinity(), F::max);
    if !m.is_finite() {
        return m;
    }
    let s: F = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
