//! Numerical check of the three robustness conditions on a loss:
//! bounded with vanishing left tail slope, locally strongly convex, and
//! smoothly decreasing.

use super::fit::linspace;
use super::LossFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionTolerances {
    /// Largest |r'| allowed at the most negative probe point.
    pub tail: f64,
    /// Largest allowed jump between adjacent finite-difference slopes.
    pub derivative_jump: f64,
    /// Each probe cell is split this many times for the slope-jump scan.
    pub smoothness_refinement: usize,
    /// Slack for the non-increasing test.
    pub monotone_slack: f64,
    pub convexity_center: f64,
    pub convexity_radius: f64,
    /// Step of the second differences inside the convexity ball.
    pub convexity_step: f64,
}

impl Default for ConditionTolerances {
    fn default() -> Self {
        Self {
            tail: 1e-4,
            derivative_jump: 1e-2,
            smoothness_refinement: 10,
            monotone_slack: 1e-12,
            convexity_center: 1.0,
            convexity_radius: 0.5,
            convexity_step: 1e-3,
        }
    }
}

impl ConditionTolerances {
    /// 4001 uniform points on `[-20, 20]`.
    pub fn default_grid() -> Vec<f64> {
        linspace(-20.0, 20.0, 4001)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub loss: LossFunction,
    pub bounded: bool,
    /// Largest loss value seen on the grid.
    pub bound_witness: f64,
    /// |r'| at the most negative grid point.
    pub derivative_tail: f64,
    /// Largest lambda for which `r(z) - lambda/2 z^2` passes the second-difference
    /// convexity test on the ball; 0 when no positive lambda does.
    pub local_convexity_lambda: f64,
    pub monotone: bool,
    pub smooth: bool,
    pub max_derivative_jump: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub grid_points: usize,
    pub tolerances: ConditionTolerances,
}

impl ConditionReport {
    pub fn locally_strongly_convex(&self) -> bool {
        self.local_convexity_lambda > 0.0
    }

    /// All three conditions hold.
    pub fn is_robust(&self) -> bool {
        self.bounded && self.locally_strongly_convex() && self.monotone && self.smooth
    }

    /// Names of the conditions that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.bounded {
            out.push("bounded");
        }
        if !self.locally_strongly_convex() {
            out.push("locally_strongly_convex");
        }
        if !self.monotone {
            out.push("monotone");
        }
        if !self.smooth {
            out.push("smooth");
        }
        out
    }
}

pub fn verify_robustness_conditions(
    loss: &LossFunction,
    grid: &[f64],
    tol: &ConditionTolerances,
) -> ConditionReport {
    let values: Vec<f64> = grid.iter().map(|&z| loss.value(z)).collect();
    let bound_witness = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let derivative_tail = grid
        .first()
        .map_or(f64::INFINITY, |&z| loss.derivative(z).abs());
    let bounded = bound_witness.is_finite() && derivative_tail < tol.tail;

    let monotone = values.windows(2).all(|w| w[1] <= w[0] + tol.monotone_slack);

    let max_derivative_jump = max_slope_jump(loss, grid, tol.smoothness_refinement.max(1));
    let smooth = max_derivative_jump <= tol.derivative_jump;

    ConditionReport {
        loss: *loss,
        bounded,
        bound_witness,
        derivative_tail,
        local_convexity_lambda: local_convexity(loss, tol),
        monotone,
        smooth,
        max_derivative_jump,
        grid_min: grid.first().copied().unwrap_or(f64::NAN),
        grid_max: grid.last().copied().unwrap_or(f64::NAN),
        grid_points: grid.len(),
        tolerances: *tol,
    }
}

fn max_slope_jump(loss: &LossFunction, grid: &[f64], refine: usize) -> f64 {
    let mut points = Vec::with_capacity(grid.len() * refine);
    for w in grid.windows(2) {
        let h = (w[1] - w[0]) / refine as f64;
        points.extend((0..refine).map(|j| w[0] + h * j as f64));
    }
    if let Some(&last) = grid.last() {
        points.push(last);
    }
    let slopes: Vec<f64> = points
        .windows(2)
        .map(|p| (loss.value(p[1]) - loss.value(p[0])) / (p[1] - p[0]))
        .collect();
    slopes
        .windows(2)
        .map(|s| (s[1] - s[0]).abs())
        .fold(0.0, f64::max)
}

fn local_convexity(loss: &LossFunction, tol: &ConditionTolerances) -> f64 {
    let h = tol.convexity_step;
    let n = ((2.0 * tol.convexity_radius / h).round() as usize).max(1) + 1;
    let lo = tol.convexity_center - tol.convexity_radius;
    let hi = tol.convexity_center + tol.convexity_radius;
    let min_curvature = linspace(lo, hi, n)
        .into_iter()
        .map(|z| (loss.value(z + h) - 2.0 * loss.value(z) + loss.value(z - h)) / (h * h))
        .fold(f64::INFINITY, f64::min);
    min_curvature.max(0.0)
}
