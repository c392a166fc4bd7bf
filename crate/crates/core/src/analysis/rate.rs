use super::AnalysisError;
use serde::{Deserialize, Serialize};

/// Gaps below this are clamped before taking logs.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Reference minimum the gaps are measured against.
    pub best: f64,
    /// `(T, G(w_T) - best)`
    pub gaps: Vec<(usize, f64)>,
    /// `(T, T * gap)`
    pub scaled: Vec<(usize, f64)>,
    /// Least-squares slope of `ln gap` against `ln T`.
    pub slope: f64,
}

impl RateReport {
    /// `T * gap` is non-increasing over every `T >= t_min`.
    pub fn scaled_non_increasing_from(&self, t_min: usize, tol: f64) -> bool {
        let tail: Vec<f64> = self
            .scaled
            .iter()
            .filter(|(t, _)| *t >= t_min)
            .map(|&(_, s)| s)
            .collect();
        tail.windows(2).all(|w| w[1] <= w[0] + tol)
    }
}

/// Least-squares slope of `ln y` on `ln x`; `y` is clamped at [`GAP_FLOOR`].
pub fn log_log_slope(points: &[(usize, f64)]) -> Result<f64, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::InvalidArgument(
            "need at least two points for a slope".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|&(t, _)| (t as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, g)| g.max(GAP_FLOOR).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::InvalidArgument(
            "all T values are equal".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Gaps of final objectives `(T, G(w_T))` against the best objective seen,
/// including `reference_best` (e.g. a longer run) when supplied.
pub fn estimate_rate(
    objectives: &[(usize, f64)],
    reference_best: Option<f64>,
) -> Result<RateReport, AnalysisError> {
    if objectives.len() < 3 {
        return Err(AnalysisError::InvalidArgument(format!(
            "need at least 3 horizons, got {}",
            objectives.len()
        )));
    }
    if objectives.iter().any(|&(t, g)| t == 0 || !g.is_finite()) {
        return Err(AnalysisError::InvalidArgument(
            "horizons must be >= 1 with finite objectives".into(),
        ));
    }
    let best = objectives
        .iter()
        .map(|&(_, g)| g)
        .chain(reference_best)
        .fold(f64::INFINITY, f64::min);
    let gaps: Vec<(usize, f64)> = objectives.iter().map(|&(t, g)| (t, g - best)).collect();
    let scaled = gaps.iter().map(|&(t, g)| (t, t as f64 * g)).collect();
    let slope = log_log_slope(&gaps)?;
    Ok(RateReport {
        best,
        gaps,
        scaled,
        slope,
    })
}
