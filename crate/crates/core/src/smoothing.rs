//! Gaussian-smoothed empirical measures.
//!
//! A [`SmoothedDensity`] is the law of `U + Z` where `U` is uniform on a list
//! of sample values and `Z ~ N(0, tau)` is independent. Equal sample values
//! are merged into weighted atoms, so evaluation cost scales with the number
//! of distinct values rather than the number of draws.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::SampleSet;
use crate::quadrature::{integrate, Integral, QuadratureSpec};
use crate::scalar::{lit, normal_outside_moments, to_f64, Real};

/// Density, derivative and score at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<F> {
    pub density: F,
    pub derivative: F,
    pub score: F,
    pub log_density: F,
}

/// Finite Gaussian mixture with common component variance `tau`.
#[derive(Clone, Debug)]
pub struct SmoothedDensity<F> {
    atoms: Vec<F>,
    weights: Vec<F>,
    log_weights: Vec<F>,
    samples: usize,
    tau: F,
    mean: F,
    center_variance: F,
}

fn group_atoms<F: Real>(mut pairs: Vec<(F, F)>) -> (Vec<F>, Vec<F>) {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite centers"));
    let mut atoms: Vec<F> = Vec::with_capacity(pairs.len());
    let mut weights: Vec<F> = Vec::with_capacity(pairs.len());
    for (x, w) in pairs {
        match atoms.last() {
            Some(&last) if last == x => {
                let k = weights.len() - 1;
                weights[k] = weights[k] + w;
            }
            _ => {
                atoms.push(x);
                weights.push(w);
            }
        }
    }
    (atoms, weights)
}

impl<F: Real> SmoothedDensity<F> {
    /// Mixture with weight `1/N` on each of the `N` centers.
    pub fn new(centers: &[F], tau: F) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        let w = F::one() / lit(centers.len() as f64);
        let mut model = Self::weighted(centers.iter().map(|&c| (c, w)).collect(), tau)?;
        model.samples = centers.len();
        Ok(model)
    }

    /// Mixture with explicit `(center, weight)` pairs; weights are renormalized.
    pub fn weighted(pairs: Vec<(F, F)>, tau: F) -> Result<Self> {
        if !(tau > F::zero()) || !tau.is_finite() {
            return Err(Error::BadBandwidth(to_f64(tau)));
        }
        if pairs.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if let Some(&(c, _)) = pairs.iter().find(|(c, w)| !c.is_finite() || !w.is_finite() || *w < F::zero()) {
            return Err(Error::NonFinitePoint(to_f64(c)));
        }
        let samples = pairs.len();
        let (atoms, mut weights) = group_atoms(pairs);
        let total: F = weights.iter().copied().sum();
        if !(total > F::zero()) {
            return Err(Error::InvalidArgument("mixture weights sum to zero".into()));
        }
        weights.iter_mut().for_each(|w| *w = *w / total);
        let mean: F = atoms.iter().zip(&weights).map(|(&a, &w)| a * w).sum();
        let center_variance: F = atoms.iter().zip(&weights).map(|(&a, &w)| w * (a - mean) * (a - mean)).sum();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self { atoms, weights, log_weights, samples, tau, mean, center_variance })
    }

    /// The normal law `N(mean, var)` as a one-atom mixture.
    pub fn gaussian(mean: F, var: F) -> Result<Self> {
        Self::new(&[mean], var)
    }

    /// Distinct centers in increasing order.
    pub fn atoms(&self) -> &[F] {
        &self.atoms
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// Number of draws the mixture was built from (before merging equal values).
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn tau(&self) -> F {
        self.tau
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    /// Population variance of the centers.
    pub fn center_variance(&self) -> F {
        self.center_variance
    }

    /// Exact model variance `center variance + tau`.
    pub fn variance(&self) -> F {
        self.center_variance + self.tau
    }

    /// The same centers smoothed with a different bandwidth.
    pub fn with_bandwidth(&self, tau: F) -> Result<Self> {
        if !(tau > F::zero()) || !tau.is_finite() {
            return Err(Error::BadBandwidth(to_f64(tau)));
        }
        Ok(Self { tau, ..self.clone() })
    }

    /// Law of `c * V`: centers scaled by `c`, bandwidth by `c^2`.
    pub fn rescale(&self, c: F) -> Result<Self> {
        if c == F::zero() || !c.is_finite() {
            return Err(Error::InvalidArgument(format!("scale factor must be finite and non-zero, got {c}")));
        }
        let pairs = self.atoms.iter().zip(&self.weights).map(|(&a, &w)| (c * a, w)).collect();
        let mut out = Self::weighted(pairs, c * c * self.tau)?;
        out.samples = self.samples;
        Ok(out)
    }

    /// Law of `V + a`.
    pub fn shift(&self, a: F) -> Self {
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|x| *x = *x + a);
        out.mean = out.mean + a;
        out
    }

    /// Mean zero, variance one version, using the exact mixture moments.
    pub fn standardized(&self) -> Result<Self> {
        self.shift(-self.mean).rescale(F::one() / self.variance().sqrt())
    }

    fn nearest(&self, u: F) -> usize {
        let i = self.atoms.partition_point(|&a| a < u);
        if i == 0 {
            0
        } else if i == self.atoms.len() || (u - self.atoms[i - 1]) <= (self.atoms[i] - u) {
            i - 1
        } else {
            i
        }
    }

    /// Atoms whose contribution at `u` is not negligible relative to the nearest one.
    fn active(&self, u: F) -> std::ops::Range<usize> {
        let k = self.nearest(u);
        let d = (u - self.atoms[k]).abs();
        // terms beyond this radius are below e^-80 / N of the leading term
        let slack =
            lit::<F>(2.0) * self.tau * (lit::<F>(80.0) + lit::<F>(self.atoms.len() as f64).ln() - self.log_weights[k]);
        let r = (d * d + slack).sqrt();
        let lo = self.atoms.partition_point(|&a| a < u - r);
        let hi = self.atoms.partition_point(|&a| a <= u + r);
        lo..hi
    }

    /// Density, derivative and score at `u`, evaluated in log-sum-exp form.
    pub fn eval(&self, u: F) -> Result<Evaluation<F>> {
        if !u.is_finite() {
            return Err(Error::NonFinitePoint(to_f64(u)));
        }
        Ok(self.eval_unchecked(u))
    }

    pub(crate) fn eval_unchecked(&self, u: F) -> Evaluation<F> {
        let half = lit::<F>(0.5);
        let range = self.active(u);
        let inv_tau = F::one() / self.tau;
        let mut m = F::neg_infinity();
        for i in range.clone() {
            let d = u - self.atoms[i];
            m = m.max(self.log_weights[i] - half * d * d * inv_tau);
        }
        let mut s0 = F::zero();
        let mut s1 = F::zero();
        for i in range {
            let d = u - self.atoms[i];
            let e = (self.log_weights[i] - half * d * d * inv_tau - m).exp();
            s0 = s0 + e;
            s1 = s1 - e * d * inv_tau;
        }
        let log_density = m + s0.ln() - half * (F::TAU() * self.tau).ln();
        let density = log_density.exp();
        let score = s1 / s0;
        Evaluation { density, derivative: density * score, score, log_density }
    }

    pub fn density(&self, u: F) -> F {
        self.eval_unchecked(u).density
    }

    pub fn log_density(&self, u: F) -> F {
        self.eval_unchecked(u).log_density
    }

    pub fn score(&self, u: F) -> F {
        self.eval_unchecked(u).score
    }

    /// Integration window: `mean +- hw sigma`, widened so every atom is at least `hw sqrt(tau)` inside.
    pub fn window(&self, half_width: F) -> (F, F) {
        let sigma = self.variance().sqrt();
        let st = self.tau.sqrt();
        let lo = (self.mean - half_width * sigma).min(self.atoms[0] - half_width * st);
        let hi = (self.mean + half_width * sigma).max(*self.atoms.last().unwrap() + half_width * st);
        (lo, hi)
    }

    /// Integrates `g(u, eval(u))` over the window of `spec`, panels at most `2 sqrt(tau)` wide.
    pub fn integrate_window(&self, spec: &QuadratureSpec<F>, g: impl Fn(F, &Evaluation<F>) -> F) -> Integral<F> {
        let (lo, hi) = self.window(spec.half_width);
        let max_panel = lit::<F>(2.0) * self.tau.sqrt();
        integrate(|u| g(u, &self.eval_unchecked(u)), lo, hi, max_panel, spec)
    }

    /// `sum_i w_i E[Y_i^p ; Y_i outside [lo, hi]]` for `p = 0, 1, 2`, `Y_i ~ N(s_i, tau)`.
    pub fn outside_moments(&self, lo: F, hi: F) -> (F, F, F) {
        let sd = self.tau.sqrt();
        let mut acc = (F::zero(), F::zero(), F::zero());
        for (&a, &w) in self.atoms.iter().zip(&self.weights) {
            let (m0, m1, m2) = normal_outside_moments(a, sd, lo, hi);
            acc = (acc.0 + w * m0, acc.1 + w * m1, acc.2 + w * m2);
        }
        acc
    }

    /// Upper bound on `int f rho^2` outside `[lo, hi]`.
    pub fn fisher_tail_bound(&self, lo: F, hi: F) -> F {
        // f rho^2 <= sum_i w_i phi_tau(u - s_i) ((u - s_i)/tau)^2 by Jensen
        let sd = self.tau.sqrt();
        let inv_tau2 = F::one() / (self.tau * self.tau);
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&a, &w)| w * normal_outside_moments(F::zero(), sd, lo - a, hi - a).2 * inv_tau2)
            .sum()
    }

    /// Fisher information `J = int f rho^2` and `J_st = sigma^2 J - 1`.
    pub fn fisher(&self, spec: &QuadratureSpec<F>) -> Result<FisherInfo<F>> {
        spec.validate()?;
        let integral = self.integrate_window(spec, |_, e| e.density * e.score * e.score);
        let tol = spec.abs_tol.max(spec.rel_tol * integral.value.abs());
        let integral = integral.require(tol)?;
        let (lo, hi) = self.window(spec.half_width);
        let tail = self.fisher_tail_bound(lo, hi);
        let sigma2 = self.variance();
        let j = integral.value;
        Ok(FisherInfo {
            j,
            j_st: sigma2 * j - F::one(),
            error: integral.error + tail,
            tail_bound: tail,
            sigma2,
            samples: self.samples,
            evaluations: integral.evaluations,
        })
    }

    /// Normalized truncated second moments `E (X - mu)^2 I(|X - mu| >= R sigma) / sigma^2`.
    pub fn tail_profile(&self, radii: &[F]) -> Result<TailProfile<F>> {
        if let Some(&r) = radii.iter().find(|r| !(r.is_finite() && **r >= F::zero())) {
            return Err(Error::InvalidArgument(format!("tail radius must be finite and non-negative, got {r}")));
        }
        let sigma2 = self.variance();
        let sigma = sigma2.sqrt();
        let centered = self.shift(-self.mean);
        let profile: Vec<F> =
            radii.iter().map(|&r| (centered.outside_moments(-r * sigma, r * sigma).2 / sigma2).min(F::one())).collect();
        let fit = fit_envelope(radii, &profile);
        Ok(TailProfile { radii: radii.to_vec(), profile, exponent: fit.map(|f| f.0), prefactor: fit.map(|f| f.1) })
    }
}

/// Least-squares fit of `log profile = log A - gamma R^2 / 2` over `R >= 1`.
fn fit_envelope<F: Real>(radii: &[F], profile: &[F]) -> Option<(F, F)> {
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(profile)
        .map(|(&r, &p)| (to_f64(r), to_f64(p)))
        .filter(|&(r, p)| r >= 1.0 && p > 1e-300)
        .map(|(r, p)| (0.5 * r * r, p.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((lit(-slope), lit((my - slope * mx).exp())))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FisherInfo<F> {
    pub j: F,
    pub j_st: F,
    /// Quadrature error estimate plus the certified tail bound.
    pub error: F,
    pub tail_bound: F,
    pub sigma2: F,
    pub samples: usize,
    pub evaluations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TailProfile<F> {
    pub radii: Vec<F>,
    pub profile: Vec<F>,
    /// `gamma` in the fitted envelope `A exp(-gamma R^2 / 2)`.
    pub exponent: Option<F>,
    pub prefactor: Option<F>,
}

/// Smooths normalized box sums with bandwidth `tau`.
pub fn smooth(samples: &SampleSet, tau: f64) -> Result<SmoothedDensity<f64>> {
    SmoothedDensity::new(&samples.draws, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn merges_equal_centers() {
        let m = SmoothedDensity::new(&[1.0f64, -1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.atoms(), &[-1.0, 1.0]);
        assert_relative_eq!(m.weights()[1], 0.75);
        assert_eq!(m.samples(), 4);
        assert_relative_eq!(m.mean(), 0.5);
        assert_relative_eq!(m.center_variance(), 0.75);
    }

    #[test]
    fn active_window_drops_only_negligible_terms() {
        let centers: Vec<f64> = (0..200).map(|i| i as f64 * 0.37 - 30.0).collect();
        let m = SmoothedDensity::new(&centers, 0.2).unwrap();
        for &u in &[-40.0, -3.3, 0.0, 12.1, 50.0] {
            let e = m.eval(u).unwrap();
            let mut f = 0.0;
            let mut fp = 0.0;
            for &c in &centers {
                let phi = (-(u - c) * (u - c) / 0.4f64).exp() / (std::f64::consts::TAU * 0.2).sqrt() / 200.0;
                f += phi;
                fp -= phi * (u - c) / 0.2;
            }
            if f > 1e-250 {
                assert_relative_eq!(e.density, f, max_relative = 1e-12);
                assert!((e.derivative - fp).abs() <= 1e-10 * f / 0.2, "{} vs {fp}", e.derivative);
            }
        }
    }

    #[test]
    fn envelope_fit_recovers_gaussian_rate() {
        let r: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let p: Vec<f64> = r.iter().map(|x| 3.0 * (-0.7 * x * x / 2.0).exp()).collect();
        let (g, a) = fit_envelope(&r, &p).unwrap();
        assert_relative_eq!(g, 0.7, max_relative = 1e-10);
        assert_relative_eq!(a, 3.0, max_relative = 1e-10);
    }
}
