//! Sampled envelopes of restricted strong convexity and smoothness on a ball
//! `B(w*, gamma)`.
//!
//! For a pair `(w, v)` the normalized Bregman gap is
//! `2 [F(w) - F(v) - <grad F(v), w - v>] / ||w - v||^2`. The convexity
//! modulus estimate is its minimum over pairs of the full objective, the
//! smoothness estimate its maximum over pairs and per-instance terms. These
//! are empirical envelopes, not certificates.

use super::AnalysisError;
use crate::data::Dataset;
use crate::loss::LossFunction;
use crate::rng::SeededRng;
use crate::solver::BiasMode;
use serde::{Deserialize, Serialize};

/// Pairs closer than this fraction of the radius are skipped.
const MIN_PAIR_DISTANCE: f64 = 1e-3;

pub trait SmoothObjective {
    fn dim(&self) -> usize;
    fn value(&self, w: &[f64]) -> f64;
    fn gradient(&self, w: &[f64]) -> Vec<f64>;
}

/// Family `g_1..g_n` of per-instance objectives.
pub trait ObjectiveFamily {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn value_at(&self, i: usize, w: &[f64]) -> f64;
    fn gradient_at(&self, i: usize, w: &[f64]) -> Vec<f64>;
}

/// `G(w) = (lambda / 2) ||w||^2 + mean_i r(y_i (<w, x_i> + b))`, with
/// `g_i(w) = (lambda / 2) ||w||^2 + r(y_i (<w, x_i> + b))`.
pub struct PrimalObjective<'a> {
    pub data: &'a Dataset,
    pub loss: LossFunction,
    pub lambda: f64,
    pub bias: BiasMode,
}

impl PrimalObjective<'_> {
    fn weight_len(&self) -> usize {
        self.data.dimension + usize::from(self.bias == BiasMode::Augmented)
    }

    fn margin(&self, i: usize, w: &[f64]) -> f64 {
        let inst = &self.data.instances[i];
        let (feat, b) = match self.bias {
            BiasMode::Augmented => (&w[..w.len() - 1], w[w.len() - 1]),
            BiasMode::None => (w, 0.0),
        };
        inst.label.as_f64() * (inst.features.dot(feat) + b)
    }

    /// Adds `coef * y_i * [x_i, 1]` into `out`.
    fn add_instance(&self, i: usize, coef: f64, out: &mut [f64]) {
        let inst = &self.data.instances[i];
        let c = coef * inst.label.as_f64();
        for (k, v) in inst.features.entries() {
            if let Some(slot) = out.get_mut(k as usize - 1) {
                *slot += c * v;
            }
        }
        if self.bias == BiasMode::Augmented {
            let last = out.len() - 1;
            out[last] += c;
        }
    }

    fn reg(&self, w: &[f64]) -> f64 {
        0.5 * self.lambda * w.iter().map(|v| v * v).sum::<f64>()
    }
}

impl SmoothObjective for PrimalObjective<'_> {
    fn dim(&self) -> usize {
        self.weight_len()
    }

    fn value(&self, w: &[f64]) -> f64 {
        let n = self.data.len();
        let total: f64 = (0..n).map(|i| self.loss.value(self.margin(i, w))).sum();
        self.reg(w) + total / n as f64
    }

    fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.data.len();
        let mut g = vec![0.0; w.len()];
        for i in 0..n {
            let d = self.loss.derivative(self.margin(i, w));
            self.add_instance(i, d / n as f64, &mut g);
        }
        g.iter_mut()
            .zip(w)
            .for_each(|(gi, wi)| *gi += self.lambda * wi);
        g
    }
}

impl ObjectiveFamily for PrimalObjective<'_> {
    fn dim(&self) -> usize {
        self.weight_len()
    }

    fn len(&self) -> usize {
        self.data.len()
    }

    fn value_at(&self, i: usize, w: &[f64]) -> f64 {
        self.reg(w) + self.loss.value(self.margin(i, w))
    }

    fn gradient_at(&self, i: usize, w: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = w.iter().map(|v| self.lambda * v).collect();
        self.add_instance(i, self.loss.derivative(self.margin(i, w)), &mut g);
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProbeReport {
    pub center: Vec<f64>,
    pub radius: f64,
    pub n_pairs: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    /// Pairs whose full-objective Bregman gap was negative.
    pub violations: usize,
}

/// Default radius `0.1 (1 + ||w*||)`.
pub fn default_radius(center: &[f64]) -> f64 {
    0.1 * (1.0 + center.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Uniform point in the ball: Gaussian direction, radius `gamma U^{1/d}`.
fn sample_in_ball(rng: &mut SeededRng, center: &[f64], gamma: f64) -> Vec<f64> {
    let d = center.len();
    let dir: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
    let norm = dir
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let r = gamma * rng.next_f64().powf(1.0 / d as f64);
    center
        .iter()
        .zip(&dir)
        .map(|(c, u)| c + r * u / norm)
        .collect()
}

fn sample_pairs(
    center: &[f64],
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<Vec<(Vec<f64>, Vec<f64>)>, AnalysisError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!(
            "radius must be positive, got {gamma}"
        )));
    }
    if center.is_empty() {
        return Err(AnalysisError::InvalidArgument("empty centre".into()));
    }
    let mut rng = SeededRng::new(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    while pairs.len() < n_pairs {
        let w = sample_in_ball(&mut rng, center, gamma);
        let v = sample_in_ball(&mut rng, center, gamma);
        if dist_sq(&w, &v).sqrt() >= MIN_PAIR_DISTANCE * gamma {
            pairs.push((w, v));
        }
    }
    Ok(pairs)
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn normalized_gap(fw: f64, fv: f64, grad_v: &[f64], w: &[f64], v: &[f64]) -> f64 {
    let inner: f64 = grad_v
        .iter()
        .zip(w.iter().zip(v))
        .map(|(g, (a, b))| g * (a - b))
        .sum();
    2.0 * (fw - fv - inner) / dist_sq(w, v)
}

fn check_dim(center: &[f64], dim: usize) -> Result<(), AnalysisError> {
    if center.len() != dim {
        return Err(AnalysisError::InvalidArgument(format!(
            "centre has {} coordinates, objective expects {dim}",
            center.len()
        )));
    }
    Ok(())
}

fn arsc_ratios<O: SmoothObjective + ?Sized>(obj: &O, pairs: &[(Vec<f64>, Vec<f64>)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|(w, v)| normalized_gap(obj.value(w), obj.value(v), &obj.gradient(v), w, v))
        .collect()
}

fn arsm_max<F: ObjectiveFamily + ?Sized>(family: &F, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let mut best = 0.0f64;
    for (w, v) in pairs {
        for i in 0..family.len() {
            let r = normalized_gap(
                family.value_at(i, w),
                family.value_at(i, v),
                &family.gradient_at(i, v),
                w,
                v,
            );
            best = best.max(r);
        }
    }
    best
}

/// Largest `alpha >= 0` with `G(w) - G(v) - <grad G(v), w - v> >= alpha/2 ||w - v||^2`
/// on every sampled pair.
pub fn probe_arsc<O: SmoothObjective + ?Sized>(
    objective: &O,
    w_star: &[f64],
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    check_dim(w_star, objective.dim())?;
    let pairs = sample_pairs(w_star, gamma, n_pairs, seed)?;
    let min = arsc_ratios(objective, &pairs)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(if min.is_finite() { min.max(0.0) } else { 0.0 })
}

/// Smallest `beta` with `g_i(w) - g_i(v) - <grad g_i(v), w - v> <= beta/2 ||w - v||^2`
/// over every sampled pair and every `i`.
pub fn probe_arsm<F: ObjectiveFamily + ?Sized>(
    family: &F,
    w_star: &[f64],
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64, AnalysisError> {
    check_dim(w_star, family.dim())?;
    let pairs = sample_pairs(w_star, gamma, n_pairs, seed)?;
    Ok(arsm_max(family, &pairs))
}

/// Both probes on one shared pair sample.
pub fn probe_convexity<O>(
    objective: &O,
    w_star: &[f64],
    gamma: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<ConvexityProbeReport, AnalysisError>
where
    O: SmoothObjective + ObjectiveFamily,
{
    check_dim(w_star, SmoothObjective::dim(objective))?;
    let pairs = sample_pairs(w_star, gamma, n_pairs, seed)?;
    let ratios = arsc_ratios(objective, &pairs);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ConvexityProbeReport {
        center: w_star.to_vec(),
        radius: gamma,
        n_pairs,
        alpha_hat: if min.is_finite() { min.max(0.0) } else { 0.0 },
        beta_hat: arsm_max(objective, &pairs),
        violations: ratios.iter().filter(|&&r| r < 0.0).count(),
    })
}
