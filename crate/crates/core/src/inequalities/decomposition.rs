//! Fisher information decomposition for a weighted sum of dependent variables.
//!
//! With `a = sqrt(beta)`, `b = sqrt(1 - beta)` and `rho~` the score of
//! `aX + bY`, the exact identity is
//!
//! ```text
//! beta J(X) + (1-beta) J(Y) - J(aX + bY) + 2ab E rho_X rho_Y + 2 E M_{a,b} rho~
//!     = E (a rho_X + b rho_Y - rho~)^2 = Delta
//! ```
//!
//! It follows from `E[(a rho^(1) + b rho^(2)) | aX + bY] = rho~`. All terms are
//! evaluated on one shared 2-D rule so the residual measures quadrature error
//! only.

use serde::Serialize;

use super::constants::Constants;
use super::expect::{expect, Method, Quad2dSpec, Region};
use super::joint::{weights_for, JointSmoothedDensity};
use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Every expectation entering the decomposition.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionTerms<F> {
    pub beta: F,
    pub j_x: F,
    pub j_y: F,
    pub j_sum: F,
    /// `E rho_X rho_Y`.
    pub cross: F,
    /// `E M_{a,b} rho~`.
    pub m_term: F,
    pub delta: F,
    /// Error estimates in the same order: `j_x, j_y, j_sum, cross, m_term, delta`.
    pub errors: [F; 6],
    pub method: Method,
}

impl<F: Real> DecompositionTerms<F> {
    /// `beta J(X) + (1 - beta) J(Y) - J(sum)`.
    pub fn subadditivity_gap(&self) -> F {
        self.beta * self.j_x + (F::one() - self.beta) * self.j_y - self.j_sum
    }

    fn ab(&self) -> (F, F) {
        (self.beta.sqrt(), (F::one() - self.beta).sqrt())
    }

    /// Left side of the identity.
    pub fn lhs(&self) -> F {
        let (a, b) = self.ab();
        let two = lit::<F>(2.0);
        self.subadditivity_gap() + two * a * b * self.cross + two * self.m_term
    }

    /// Error bound on `lhs - delta` from the individual error estimates.
    pub fn residual_tolerance(&self) -> F {
        let (a, b) = self.ab();
        let two = lit::<F>(2.0);
        let e = &self.errors;
        self.beta * e[0] + (F::one() - self.beta) * e[1] + e[2] + two * a * b * e[3] + two * e[4] + e[5]
    }
}

/// Evaluates all decomposition terms in one pass.
pub fn decompose<F: Real>(
    joint: &JointSmoothedDensity<F>,
    beta: F,
    spec: &Quad2dSpec<F>,
) -> Result<DecompositionTerms<F>> {
    let (a, b) = weights_for(beta)?;
    let one = F::one();
    // |g| <= c L^2 with every score bounded by L
    let coeff = [one, one, one, one, lit(4.0), lit(6.0)];
    let r = expect(joint, beta, Region::Whole, spec, coeff, |p| {
        let m = a * (p.rho1 - p.rho_x) + b * (p.rho2 - p.rho_y);
        let gap = a * p.rho_x + b * p.rho_y - p.rho_sum;
        [p.rho_x * p.rho_x, p.rho_y * p.rho_y, p.rho_sum * p.rho_sum, p.rho_x * p.rho_y, m * p.rho_sum, gap * gap]
    })?;
    let v = &r.values;
    let e = &r.errors;
    Ok(DecompositionTerms {
        beta,
        j_x: v[0],
        j_y: v[1],
        j_sum: v[2],
        cross: v[3],
        m_term: v[4],
        delta: v[5],
        errors: [e[0], e[1], e[2], e[3], e[4], e[5]],
        method: r.method,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate<F> {
    pub value: F,
    pub error: F,
}

/// `Delta(X, Y, beta) = E (sqrt(beta) rho_X + sqrt(1-beta) rho_Y - rho~)^2`.
pub fn delta<F: Real>(joint: &JointSmoothedDensity<F>, beta: F, spec: &Quad2dSpec<F>) -> Result<Estimate<F>> {
    let (a, b) = weights_for(beta)?;
    let r = expect(joint, beta, Region::Whole, spec, [lit(6.0)], |p| {
        let gap = a * p.rho_x + b * p.rho_y - p.rho_sum;
        [gap * gap]
    })?;
    Ok(Estimate { value: r.values[0], error: r.errors[0] })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck<F> {
    pub terms: DecompositionTerms<F>,
    pub lhs: F,
    pub rhs: F,
    /// `|lhs - rhs|` for the identity with `2 E M rho~`.
    pub residual: F,
    /// `|lhs - rhs|` when the M-term enters with coefficient one instead of two.
    pub residual_single_m: F,
    pub tolerance: F,
}

/// Both sides of the decomposition identity on a shared rule.
pub fn fishdecomp_residual<F: Real>(
    joint: &JointSmoothedDensity<F>,
    beta: F,
    spec: &Quad2dSpec<F>,
) -> Result<IdentityCheck<F>> {
    if !(beta > F::zero() && beta < F::one()) {
        return Err(Error::InvalidArgument(format!("beta must lie in (0, 1), got {beta}")));
    }
    let terms = decompose(joint, beta, spec)?;
    let lhs = terms.lhs();
    let rhs = terms.delta;
    Ok(IdentityCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
        residual_single_m: (lhs - terms.m_term - rhs).abs(),
        tolerance: terms.residual_tolerance(),
        terms,
    })
}

/// Exponent applied to `Cov(S, T)` in the correction term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum ExponentMode<F> {
    /// `1/3 - eps` using the configured `eps`.
    Epsilon,
    /// `(2 + delta) / (6 + delta)` for variables with `2 + delta` moments.
    Moment(F),
}

#[derive(Clone, Debug, Serialize)]
pub struct GapOptions<F> {
    pub beta: F,
    pub epsilon: F,
    /// Second-moment bound `K`; defaults to the largest raw second moment of the centers.
    pub k_bound: Option<F>,
    pub mode: ExponentMode<F>,
    /// Orders `k` for which `c_{tau,k}` is reported.
    pub ks: Vec<u32>,
}

impl<F: Real> Default for GapOptions<F> {
    fn default() -> Self {
        Self { beta: lit(0.5), epsilon: lit(0.05), k_bound: None, mode: ExponentMode::Epsilon, ks: vec![2, 4] }
    }
}

/// Covariance below which the correction term is skipped.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport<F> {
    pub beta: F,
    pub j_x: F,
    pub j_y: F,
    pub j_sum: F,
    pub cross: F,
    pub m_term: F,
    pub delta: F,
    pub delta_error: F,
    /// `beta J(X) + (1 - beta) J(Y) - J(sum)`.
    pub subadditivity_gap: F,
    pub identity_residual: F,
    pub identity_tolerance: F,
    pub covariance: F,
    pub k_bound: F,
    pub exponent: F,
    pub mode: ExponentMode<F>,
    /// `B = (K / Cov)^{1/6}` (or `^{1/(6 + delta)}` in moment mode).
    pub b: Option<F>,
    /// Set when `B <= 1`, outside the range where the score-body bound applies.
    pub b_flagged: bool,
    /// Smallest `C` with `gap + C Cov^exponent >= Delta`; `None` when the covariance is below the floor.
    pub minimal_c: Option<F>,
    /// When the correction is skipped: whether `gap >= Delta` holds within tolerance.
    pub independent_subadditive: Option<bool>,
    /// `Delta - gap = 2ab E rho_X rho_Y + 2 E M rho~`, the quantity the correction must dominate.
    pub excess: F,
    /// Explicit bound on `excess` from the assembled constants at the reported `B` (epsilon mode).
    pub assembled_bound: Option<F>,
    pub constants: Constants<F>,
    pub method: Method,
}

/// Minimal correction constant and the explicit bound chain for one joint.
pub fn theorem_gap<F: Real>(
    joint: &JointSmoothedDensity<F>,
    opts: &GapOptions<F>,
    spec: &Quad2dSpec<F>,
) -> Result<DecompositionReport<F>> {
    let third = F::one() / lit(3.0);
    if !(opts.epsilon > F::zero() && opts.epsilon < third) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1/3), got {}", opts.epsilon)));
    }
    let cov = joint.covariance();
    let floor = lit::<F>(COVARIANCE_FLOOR);
    if cov < -floor {
        return Err(Error::NegativeCovariance(to_f64(cov)));
    }
    let max_var = joint.marginal_x().center_variance().max(joint.marginal_y().center_variance());
    let k_bound = opts.k_bound.unwrap_or_else(|| joint.second_moment());
    if !(k_bound >= max_var * (F::one() - lit(1e-12))) {
        return Err(Error::InvalidArgument(format!("K = {k_bound} is below the marginal variance {max_var}")));
    }
    let (exponent, b_root) = match opts.mode {
        ExponentMode::Epsilon => (third - opts.epsilon, lit::<F>(6.0)),
        ExponentMode::Moment(d) => {
            if !(d > F::zero()) {
                return Err(Error::InvalidArgument(format!("moment delta must be positive, got {d}")));
            }
            ((lit::<F>(2.0) + d) / (lit::<F>(6.0) + d), lit::<F>(6.0) + d)
        }
    };
    let check = fishdecomp_residual(joint, opts.beta, spec)?;
    let t = &check.terms;
    let gap = t.subadditivity_gap();
    let excess = t.delta - gap;
    let constants = Constants::new(joint.tau(), k_bound, joint.fourth_moment(), opts.epsilon, &opts.ks);

    let (minimal_c, independent_subadditive, b) = if cov < floor {
        (None, Some(gap >= t.delta - check.tolerance), None)
    } else {
        (Some(excess.max(F::zero()) / cov.powf(exponent)), None, Some((k_bound / cov).powf(F::one() / b_root)))
    };
    let assembled_bound = match (b, opts.mode) {
        (Some(bb), ExponentMode::Epsilon) => {
            let (a, c) = (opts.beta.sqrt(), (F::one() - opts.beta).sqrt());
            let two = lit::<F>(2.0);
            let b4 = bb.powi(4);
            let prod = constants.f4 * b4 * cov + constants.f5 / (bb * bb);
            let m_in = constants.f2 * (a + c) * b4 * cov;
            let m_out = (a + c) * constants.f3 / bb.powf(two - opts.epsilon);
            Some(two * a * c * prod + two * (m_in + m_out))
        }
        _ => None,
    };
    Ok(DecompositionReport {
        beta: opts.beta,
        j_x: t.j_x,
        j_y: t.j_y,
        j_sum: t.j_sum,
        cross: t.cross,
        m_term: t.m_term,
        delta: t.delta,
        delta_error: t.errors[5],
        subadditivity_gap: gap,
        identity_residual: check.residual,
        identity_tolerance: check.tolerance,
        covariance: cov,
        k_bound,
        exponent,
        mode: opts.mode,
        b_flagged: b.is_some_and(|bb| bb <= F::one()),
        b,
        minimal_c,
        independent_subadditive,
        excess,
        assembled_bound,
        constants,
        method: t.method,
    })
}
