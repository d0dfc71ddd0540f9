//! Gauss–Legendre and Gauss–Hermite rules plus a panelled adaptive integrator.
//!
//! The integrator splits a finite window into panels no wider than a caller
//! supplied scale (for Gaussian mixtures, a couple of component standard
//! deviations) and then bisects each panel until the difference between the
//! panel rule and its two halves drops below the locally allotted tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Probabilists' Gauss–Hermite rule: `E g(Z) ≈ Σ w_i g(x_i)` for `Z ~ N(0, 1)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Hermite order must be positive");
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let nf = n as f64;
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let sqrtpi = std::f64::consts::PI.sqrt();
    let mut nodes: Vec<f64> = x.iter().map(|v| v * sqrt2).collect();
    let mut weights: Vec<f64> = w.iter().map(|v| v / sqrtpi).collect();
    nodes.reverse();
    weights.reverse();
    (nodes, weights)
}

/// Panel rule used by [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadRule {
    /// Fixed Gauss–Legendre panels; the error is estimated from one bisection.
    FixedPanels,
    /// Panels bisected until the local error estimate meets the tolerance.
    Adaptive,
}

/// Controls for one-dimensional integration of smoothed densities.
#[derive(Clone, Debug, Serialize)]
pub struct QuadratureSpec<F> {
    pub rule: QuadRule,
    /// Minimum total number of nodes in the initial partition.
    pub nodes: usize,
    /// Gauss–Legendre order used on every panel.
    pub panel_order: usize,
    /// Integration half-width, in model standard deviations.
    pub half_width: F,
    pub abs_tol: F,
    pub rel_tol: F,
    pub max_depth: u32,
}

impl<F: Real> Default for QuadratureSpec<F> {
    fn default() -> Self {
        Self {
            rule: QuadRule::Adaptive,
            nodes: 64,
            panel_order: 16,
            half_width: lit(12.0),
            abs_tol: lit(1e-10),
            rel_tol: lit(1e-12),
            max_depth: 40,
        }
    }
}

impl<F: Real> QuadratureSpec<F> {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 64 {
            return Err(Error::InvalidArgument(format!("quadrature needs >= 64 nodes, got {}", self.nodes)));
        }
        if self.half_width < lit(8.0) {
            return Err(Error::InvalidArgument(format!(
                "quadrature half-width must be >= 8 sigma, got {}",
                self.half_width
            )));
        }
        if !(2..=256).contains(&self.panel_order) {
            return Err(Error::InvalidArgument(format!("panel order {} out of range", self.panel_order)));
        }
        if !(self.abs_tol > F::zero()) || self.rel_tol < F::zero() {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Same spec with a different absolute tolerance.
    pub fn with_tol(&self, abs_tol: F) -> Self {
        Self { abs_tol, ..self.clone() }
    }
}

/// Result of a one-dimensional integration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Integral<F> {
    pub value: F,
    /// Estimated absolute error of `value` (quadrature only, no tail terms).
    pub error: F,
    pub evaluations: usize,
    pub converged: bool,
}

impl<F: Real> Integral<F> {
    /// Fails when the error estimate exceeds `tol`.
    pub fn require(self, tol: F) -> Result<Self> {
        if self.converged || self.error <= tol {
            Ok(self)
        } else {
            Err(Error::Quadrature { requested: to_f64(tol), achieved: to_f64(self.error) })
        }
    }
}

struct PanelRule<F> {
    x: Vec<F>,
    w: Vec<F>,
}

impl<F: Real> PanelRule<F> {
    fn new(order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        Self { x: x.into_iter().map(lit).collect(), w: w.into_iter().map(lit).collect() }
    }

    fn apply(&self, f: &impl Fn(F) -> F, a: F, b: F) -> F {
        let half = lit::<F>(0.5);
        let c = half * (a + b);
        let h = half * (b - a);
        let mut s = F::zero();
        for (&x, &w) in self.x.iter().zip(&self.w) {
            s = s + w * f(c + h * x);
        }
        s * h
    }
}

/// Integrates `f` over `[lo, hi]`.
///
/// The initial partition uses at least `spec.nodes` nodes and panels no wider
/// than `max_panel`.
pub fn integrate<F: Real>(f: impl Fn(F) -> F, lo: F, hi: F, max_panel: F, spec: &QuadratureSpec<F>) -> Integral<F> {
    if !(hi > lo) {
        return Integral { value: F::zero(), error: F::zero(), evaluations: 0, converged: true };
    }
    let rule = PanelRule::new(spec.panel_order);
    let width = hi - lo;
    let by_nodes = spec.nodes.div_ceil(spec.panel_order).max(1);
    let by_width = if max_panel > F::zero() { to_f64(width / max_panel).ceil().min(1e6) as usize } else { 1 };
    let panels = by_nodes.max(by_width).max(1);
    let step = width / lit(panels as f64);

    let mut coarse = Vec::with_capacity(panels);
    let mut total = F::zero();
    for i in 0..panels {
        let a = lo + step * lit(i as f64);
        let b = if i + 1 == panels { hi } else { lo + step * lit((i + 1) as f64) };
        let v = rule.apply(&f, a, b);
        total = total + v;
        coarse.push((a, b, v));
    }
    let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
    let depth_limit = match spec.rule {
        QuadRule::Adaptive => spec.max_depth,
        QuadRule::FixedPanels => 0,
    };

    let mut value = F::zero();
    let mut error = F::zero();
    let mut evaluations = panels * spec.panel_order;
    let mut converged = true;
    let half = lit::<F>(0.5);
    let mut stack: Vec<(F, F, F, F, u32)> = Vec::new();
    for (a, b, whole) in coarse {
        stack.push((a, b, whole, tol * (b - a) / width, 0));
        while let Some((a, b, whole, local_tol, depth)) = stack.pop() {
            let m = half * (a + b);
            let left = rule.apply(&f, a, m);
            let right = rule.apply(&f, m, b);
            evaluations += 2 * spec.panel_order;
            let refined = left + right;
            let diff = (whole - refined).abs();
            if diff <= local_tol || depth >= depth_limit || !diff.is_finite() {
                if diff > local_tol {
                    converged = false;
                }
                value = value + refined;
                error = error + diff;
            } else {
                stack.push((a, m, left, local_tol * half, depth + 1));
                stack.push((m, b, right, local_tol * half, depth + 1));
            }
        }
    }
    if spec.rule == QuadRule::FixedPanels {
        converged = error <= tol;
    }
    Integral { value, error, evaluations, converged }
}

/// Composite Gauss–Legendre nodes and weights on `[lo, hi]`.
pub fn composite_rule<F: Real>(lo: F, hi: F, panels: usize, order: usize) -> (Vec<F>, Vec<F>) {
    let rule = PanelRule::<F>::new(order);
    let step = (hi - lo) / lit(panels as f64);
    let half = lit::<F>(0.5);
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for i in 0..panels {
        let a = lo + step * lit(i as f64);
        let c = a + half * step;
        for (&x, &w) in rule.x.iter().zip(&rule.w) {
            nodes.push(c + half * step * x);
            weights.push(half * step * w);
        }
    }
    (nodes, weights)
}

/// Trapezoid rule over possibly non-uniform abscissae.
pub fn trapezoid<F: Real>(x: &[F], y: &[F]) -> F {
    let half = lit::<F>(0.5);
    x.windows(2).zip(y.windows(2)).map(|(xs, ys)| half * (xs[1] - xs[0]) * (ys[0] + ys[1])).sum()
}
