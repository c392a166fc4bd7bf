//! Least-squares fit of the Smooth Ramp shape `(alpha, beta)` to a Ramp loss.

use super::{LossError, LossFunction};
use serde::{Deserialize, Serialize};

const ALPHA_RANGE: (f64, f64, f64) = (0.5, 5.0, 0.1);
const BETA_RANGE: (f64, f64, f64) = (-1.0, 1.0, 0.01);
const MIN_STEP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothRampFit {
    pub s_star: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Sum of squared differences to the Ramp loss over the probe grid.
    pub sse: f64,
}

/// 1001 uniform points on `[s* - 2, 3]`.
pub fn default_fit_grid(s_star: f64) -> Vec<f64> {
    linspace(s_star - 2.0, 3.0, 1001)
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Sum over `grid` of `(SmoothRamp(z) - Ramp(z))^2`.
pub fn ramp_fit_sse(s_star: f64, alpha: f64, beta: f64, grid: &[f64]) -> f64 {
    let ramp = LossFunction::Ramp { s_star };
    let smooth = LossFunction::SmoothRamp {
        s_star,
        alpha,
        beta,
    };
    grid.iter()
        .map(|&z| {
            let d = smooth.value(z) - ramp.value(z);
            d * d
        })
        .sum()
}

/// Exhaustive search over `alpha in [0.5, 5]` (step 0.1) and `beta in [-1, 1]`
/// (step 0.01), then compass search from the best cell down to step 1e-10.
pub fn fit_smooth_ramp(s_star: f64, grid: &[f64]) -> Result<SmoothRampFit, LossError> {
    if !(s_star < 1.0) {
        return Err(LossError::InvalidParameter(format!(
            "s* must be below 1, got {s_star}"
        )));
    }
    let mut distinct: Vec<f64> = grid.iter().copied().filter(|z| z.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(LossError::DegenerateGrid(format!(
            "need at least 2 distinct finite points, got {}",
            distinct.len()
        )));
    }

    let sse = |a: f64, b: f64| ramp_fit_sse(s_star, a, b, grid);
    let steps = |(lo, hi, step): (f64, f64, f64)| {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(move |i| lo + step * i as f64)
    };

    let (mut alpha, mut beta, mut best) = (f64::NAN, f64::NAN, f64::INFINITY);
    for a in steps(ALPHA_RANGE) {
        for b in steps(BETA_RANGE) {
            let v = sse(a, b);
            if v < best {
                (alpha, beta, best) = (a, b, v);
            }
        }
    }

    let (mut da, mut db) = (ALPHA_RANGE.2 / 2.0, BETA_RANGE.2 / 2.0);
    while da > MIN_STEP || db > MIN_STEP {
        let mut moved = false;
        for (ta, tb) in [(da, 0.0), (-da, 0.0), (0.0, db), (0.0, -db)] {
            let (a, b) = (alpha + ta, beta + tb);
            if a <= 0.0 {
                continue;
            }
            let v = sse(a, b);
            if v < best {
                (alpha, beta, best) = (a, b, v);
                moved = true;
            }
        }
        if !moved {
            da /= 2.0;
            db /= 2.0;
        }
    }

    Ok(SmoothRampFit {
        s_star,
        alpha,
        beta,
        sse: best,
    })
}
