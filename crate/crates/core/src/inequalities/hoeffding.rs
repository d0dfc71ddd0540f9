//! Exact integrals of the empirical quadrant-dependence function.
//!
//! For the empirical law of the centers, `H(s,t)` is piecewise constant on
//! the rectangles cut out by the distinct coordinate values, so its integral
//! and the integral of its negative part are finite sums. The integral equals
//! the (population) covariance of the centers.

use serde::Serialize;

use super::joint::JointSmoothedDensity;
use crate::scalar::{lit, Real};

/// Rectangle count above which the exact sums are skipped.
pub const MAX_CELLS: usize = 25_000_000;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HoeffdingIntegrals<F> {
    /// `int H`, equal to the covariance.
    pub integral: F,
    /// `int max(-H, 0)`.
    pub negative_part: F,
}

/// `int H` and `int H_-` for the center distribution of `joint`; `None` if the grid is too large.
pub fn hoeffding_integrals<F: Real>(joint: &JointSmoothedDensity<F>) -> Option<HoeffdingIntegrals<F>> {
    let centers: Vec<(f64, f64, f64)> = joint
        .centers()
        .map(|(s, t, w)| (crate::scalar::to_f64(s), crate::scalar::to_f64(t), crate::scalar::to_f64(w)))
        .collect();
    let distinct = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let sv = distinct(centers.iter().map(|c| c.0).collect());
    let tv = distinct(centers.iter().map(|c| c.1).collect());
    let (ns, nt) = (sv.len(), tv.len());
    if ns.saturating_mul(nt) > MAX_CELLS {
        return None;
    }
    // mass[i][j] = weight at (sv[i], tv[j]); tail[i][j] = P(S >= sv[i], T >= tv[j])
    let mut tail = vec![0.0f64; (ns + 1) * (nt + 1)];
    for &(s, t, w) in &centers {
        let i = sv.partition_point(|&v| v < s);
        let j = tv.partition_point(|&v| v < t);
        tail[i * (nt + 1) + j] += w;
    }
    for i in (0..ns).rev() {
        for j in (0..nt).rev() {
            tail[i * (nt + 1) + j] +=
                tail[(i + 1) * (nt + 1) + j] + tail[i * (nt + 1) + j + 1] - tail[(i + 1) * (nt + 1) + j + 1];
        }
    }
    let ps = |i: usize| tail[i * (nt + 1)];
    let pt = |j: usize| tail[j];
    let (mut integral, mut negative) = (0.0f64, 0.0f64);
    // H is constant on (sv[i-1], sv[i]] x (tv[j-1], tv[j]] and zero outside the hull
    for i in 1..ns {
        let ds = sv[i] - sv[i - 1];
        for j in 1..nt {
            let h = tail[i * (nt + 1) + j] - ps(i) * pt(j);
            let area = ds * (tv[j] - tv[j - 1]);
            integral += h * area;
            if h < 0.0 {
                negative -= h * area;
            }
        }
    }
    Some(HoeffdingIntegrals { integral: lit(integral), negative_part: lit(negative) })
}
