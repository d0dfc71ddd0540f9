use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::stream_rng;
use crate::quadrature::{integrate, QuadratureSpec};
use crate::scalar::{lit, to_f64, Real};
use crate::smoothing::SmoothedDensity;

/// Joint density and conditional scores at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JointEvaluation<F> {
    pub density: F,
    pub log_density: F,
    /// `d/dx log p`.
    pub rho1: F,
    /// `d/dy log p`.
    pub rho2: F,
}

/// Bivariate mixture `p(x, y) = sum_i w_i phi_tau(x - s_i) phi_tau(y - t_i)`.
#[derive(Clone, Debug)]
pub struct JointSmoothedDensity<F> {
    s: Vec<F>,
    t: Vec<F>,
    weights: Vec<F>,
    log_weights: Vec<F>,
    samples: usize,
    tau: F,
    marginal_x: SmoothedDensity<F>,
    marginal_y: SmoothedDensity<F>,
    covariance: F,
}

impl<F: Real> JointSmoothedDensity<F> {
    /// Equal-weight mixture over the given pairs; identical pairs are merged.
    pub fn new(pairs: &[(F, F)], tau: F) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !(tau > F::zero()) || !tau.is_finite() {
            return Err(Error::BadBandwidth(to_f64(tau)));
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(Error::NonFinitePoint(if a.is_finite() { to_f64(b) } else { to_f64(a) }));
        }
        let mut sorted = pairs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite pairs"));
        let unit = F::one() / lit(pairs.len() as f64);
        let (mut s, mut t, mut weights) = (Vec::new(), Vec::new(), Vec::<F>::new());
        for (a, b) in sorted {
            if s.last() == Some(&a) && t.last() == Some(&b) {
                let k = weights.len() - 1;
                weights[k] = weights[k] + unit;
            } else {
                s.push(a);
                t.push(b);
                weights.push(unit);
            }
        }
        let xs: Vec<F> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<F> = pairs.iter().map(|p| p.1).collect();
        let marginal_x = SmoothedDensity::new(&xs, tau)?;
        let marginal_y = SmoothedDensity::new(&ys, tau)?;
        let (mx, my) = (marginal_x.mean(), marginal_y.mean());
        let covariance = s.iter().zip(&t).zip(&weights).map(|((&a, &b), &w)| w * (a - mx) * (b - my)).sum();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { s, t, weights, log_weights, samples: pairs.len(), tau, marginal_x, marginal_y, covariance })
    }

    pub fn tau(&self) -> F {
        self.tau
    }

    /// Number of pairs before merging.
    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Number of distinct pairs.
    pub fn atoms(&self) -> usize {
        self.s.len()
    }

    pub fn centers(&self) -> impl Iterator<Item = (F, F, F)> + '_ {
        self.s.iter().zip(&self.t).zip(&self.weights).map(|((&a, &b), &w)| (a, b, w))
    }

    pub fn marginal_x(&self) -> &SmoothedDensity<F> {
        &self.marginal_x
    }

    pub fn marginal_y(&self) -> &SmoothedDensity<F> {
        &self.marginal_y
    }

    /// Exact (population) covariance of the centers.
    pub fn covariance(&self) -> F {
        self.covariance
    }

    /// Largest raw second moment of the two coordinates of the centers.
    pub fn second_moment(&self) -> F {
        let m = |v: &[F]| -> F { v.iter().zip(&self.weights).map(|(&a, &w)| w * a * a).sum() };
        m(&self.s).max(m(&self.t))
    }

    /// Largest raw fourth moment of the two coordinates of the centers.
    pub fn fourth_moment(&self) -> F {
        let m = |v: &[F]| -> F { v.iter().zip(&self.weights).map(|(&a, &w)| w * a * a * a * a).sum() };
        m(&self.s).max(m(&self.t))
    }

    /// `max_i (|s_i| + |t_i|)`.
    pub(crate) fn spread(&self) -> F {
        self.s.iter().zip(&self.t).map(|(a, b)| a.abs() + b.abs()).fold(F::zero(), F::max)
    }

    /// Coordinate ranges of the centers.
    pub(crate) fn ranges(&self) -> ((F, F), (F, F)) {
        let r = |v: &[F]| v.iter().fold((F::infinity(), F::neg_infinity()), |(lo, hi), &a| (lo.min(a), hi.max(a)));
        (r(&self.s), r(&self.t))
    }

    pub fn with_bandwidth(&self, tau: F) -> Result<Self> {
        if !(tau > F::zero()) || !tau.is_finite() {
            return Err(Error::BadBandwidth(to_f64(tau)));
        }
        Ok(Self {
            tau,
            marginal_x: self.marginal_x.with_bandwidth(tau)?,
            marginal_y: self.marginal_y.with_bandwidth(tau)?,
            ..self.clone()
        })
    }

    /// Law of `sqrt(beta) X + sqrt(1 - beta) Y`: centers combined the same way, bandwidth `tau`.
    pub fn sum_model(&self, beta: F) -> Result<SmoothedDensity<F>> {
        let (a, b) = weights_for(beta)?;
        let mut model =
            SmoothedDensity::weighted(self.centers().map(|(s, t, w)| (a * s + b * t, w)).collect(), self.tau)?;
        if beta == F::one() {
            model = self.marginal_x.clone();
        } else if beta == F::zero() {
            model = self.marginal_y.clone();
        }
        Ok(model)
    }

    pub fn eval(&self, x: F, y: F) -> Result<JointEvaluation<F>> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinitePoint(if x.is_finite() { to_f64(y) } else { to_f64(x) }));
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: F, y: F) -> JointEvaluation<F> {
        let half = lit::<F>(0.5);
        let inv_tau = F::one() / self.tau;
        let expo = |i: usize| -> F {
            let (dx, dy) = (x - self.s[i], y - self.t[i]);
            self.log_weights[i] - half * (dx * dx + dy * dy) * inv_tau
        };
        let m = (0..self.s.len()).map(expo).fold(F::neg_infinity(), F::max);
        let (mut s0, mut sx, mut sy) = (F::zero(), F::zero(), F::zero());
        for i in 0..self.s.len() {
            let e = (expo(i) - m).exp();
            s0 = s0 + e;
            sx = sx - e * (x - self.s[i]) * inv_tau;
            sy = sy - e * (y - self.t[i]) * inv_tau;
        }
        let log_density = m + s0.ln() - (F::TAU() * self.tau).ln();
        JointEvaluation { density: log_density.exp(), log_density, rho1: sx / s0, rho2: sy / s0 }
    }

    /// `(rho^(1)(x, y), rho^(2)(x, y))`.
    pub fn joint_scores(&self, x: F, y: F) -> Result<(F, F)> {
        self.eval(x, y).map(|e| (e.rho1, e.rho2))
    }

    /// `M_{a,b}(x, y) = a (rho^(1) - rho_X) + b (rho^(2) - rho_Y)`.
    pub fn m_function(&self, a: F, b: F, x: F, y: F) -> Result<F> {
        let e = self.eval(x, y)?;
        let rx = self.marginal_x.score(x);
        let ry = self.marginal_y.score(y);
        Ok(a * (e.rho1 - rx) + b * (e.rho2 - ry))
    }

    /// `M_{a,b}` through density differences:
    /// `[a (p1 - p'_X p_Y) + b (p2 - p_X p'_Y) + (a rho_X + b rho_Y)(p_X p_Y - p)] / p`.
    pub fn m_function_density_form(&self, a: F, b: F, x: F, y: F) -> Result<F> {
        let e = self.eval(x, y)?;
        let ex = self.marginal_x.eval(x)?;
        let ey = self.marginal_y.eval(y)?;
        let p = e.density;
        let p1 = p * e.rho1;
        let p2 = p * e.rho2;
        let prod = ex.density * ey.density;
        let num = a * (p1 - ex.derivative * ey.density)
            + b * (p2 - ex.density * ey.derivative)
            + (a * ex.score + b * ey.score) * (prod - p);
        Ok(num / p)
    }

    /// Compares the sum-model score against its conditional-expectation representation.
    ///
    /// For `beta > 0` the score at `z` is `(1/sqrt(beta)) E[rho^(1) | sum = z]`
    /// and for `beta < 1` it is `(1/sqrt(1 - beta)) E[rho^(2) | sum = z]`; both
    /// are computed as line integrals of the joint mixture and compared with
    /// the direct mixture score.
    pub fn score_of_sum_check(&self, beta: F, grid: &[F], spec: &QuadratureSpec<F>) -> Result<SumScoreCheck<F>> {
        let (a, b) = weights_for(beta)?;
        let sum = self.sum_model(beta)?;
        let mut residuals = Vec::with_capacity(grid.len());
        for &z in grid {
            let direct = sum.eval(z)?;
            let mut worst = F::zero();
            if a > F::zero() {
                let r = self.line_score(z, a, b, true, direct.log_density, spec);
                worst = worst.max((r - direct.score).abs());
            }
            if b > F::zero() {
                let r = self.line_score(z, b, a, false, direct.log_density, spec);
                worst = worst.max((r - direct.score).abs());
            }
            residuals.push(worst);
        }
        let max_residual = residuals.iter().copied().fold(F::zero(), F::max);
        Ok(SumScoreCheck { beta, grid: grid.to_vec(), residuals, max_residual })
    }

    /// `(1/c) int rho^(k) p dv / int p dv` along `c u + d v = z`, with `u` the
    /// first coordinate when `first` holds.
    fn line_score(&self, z: F, c: F, d: F, first: bool, log_scale: F, spec: &QuadratureSpec<F>) -> F {
        let point = |v: F| -> (F, F) {
            let u = (z - d * v) / c;
            if first {
                (u, v)
            } else {
                (v, u)
            }
        };
        // conditional law of the free coordinate for each component: variance tau c^2
        let sd = self.tau.sqrt() * c;
        let (lo, hi) = self
            .centers()
            .map(|(s, t, _)| {
                let (own, other) = if first { (s, t) } else { (t, s) };
                other + d * (z - c * own - d * other)
            })
            .fold((F::infinity(), F::neg_infinity()), |(l, h), m| (l.min(m), h.max(m)));
        let hw = spec.half_width;
        let (lo, hi) = (lo - hw * sd, hi + hw * sd);
        let weight = |v: F| -> (F, F) {
            let (x, y) = point(v);
            let e = self.eval_unchecked(x, y);
            let w = (e.log_density - log_scale).exp();
            (w, if first { e.rho1 } else { e.rho2 } * w)
        };
        let tight = QuadratureSpec { abs_tol: lit(1e-14), rel_tol: lit(1e-14), ..spec.clone() };
        let den = integrate(|v| weight(v).0, lo, hi, lit::<F>(2.0) * sd, &tight);
        let num = integrate(|v| weight(v).1, lo, hi, lit::<F>(2.0) * sd, &tight);
        num.value / den.value / c
    }
}

/// `(sqrt(beta), sqrt(1 - beta))`, rejecting `beta` outside `[0, 1]`.
pub fn weights_for<F: Real>(beta: F) -> Result<(F, F)> {
    if !(beta >= F::zero() && beta <= F::one()) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 1], got {beta}")));
    }
    Ok((beta.sqrt(), (F::one() - beta).sqrt()))
}

#[derive(Clone, Debug, Serialize)]
pub struct SumScoreCheck<F> {
    pub beta: F,
    pub grid: Vec<F>,
    pub residuals: Vec<F>,
    pub max_residual: F,
}

/// Pairs with the second coordinates randomly permuted, which breaks any dependence.
pub fn shuffle_pairs<F: Copy>(pairs: &[(F, F)], seed: u64) -> Vec<(F, F)> {
    let mut second: Vec<F> = pairs.iter().map(|p| p.1).collect();
    second.shuffle(&mut stream_rng(seed, u64::MAX));
    pairs.iter().zip(second).map(|(p, t)| (p.0, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn merges_pairs_and_keeps_marginals() {
        let j = JointSmoothedDensity::new(&[(1.0f64, 2.0), (1.0, 2.0), (0.0, -1.0)], 0.5).unwrap();
        assert_eq!(j.atoms(), 2);
        assert_eq!(j.samples(), 3);
        assert_relative_eq!(j.marginal_x().mean(), 2.0 / 3.0, epsilon = 1e-15);
        // population covariance of the three pairs
        let cov = (2.0 * (1.0 - 2.0 / 3.0) * (2.0 - 1.0) + (0.0 - 2.0 / 3.0) * (-1.0 - 1.0)) / 3.0;
        assert_relative_eq!(j.covariance(), cov, epsilon = 1e-15);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let pairs: Vec<(f64, f64)> = (0..50).map(|i| (i as f64, i as f64 * 2.0)).collect();
        let sh = shuffle_pairs(&pairs, 3);
        let mut t: Vec<f64> = sh.iter().map(|p| p.1).collect();
        t.sort_by(f64::total_cmp);
        assert_eq!(t, pairs.iter().map(|p| p.1).collect::<Vec<_>>());
        assert!(sh.iter().zip(&pairs).all(|(a, b)| a.0 == b.0));
    }
}
