//! Margin losses `r(z)` with `z = y * f(x)`.
//!
//! Two bounded, smooth, decreasing losses (Smooth Ramp and Reversed
//! Gompertz) sit next to the three usual baselines. All derivatives are
//! hand-coded; evaluation is defined for every finite `z`.

mod conditions;
mod fit;

pub use conditions::{verify_robustness_conditions, ConditionReport, ConditionTolerances};
pub use fit::{default_fit_grid, fit_smooth_ramp, ramp_fit_sse, SmoothRampFit};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("invalid loss parameter: {0}")]
    InvalidParameter(String),
    #[error("cannot parse loss spec `{0}`")]
    BadSpec(String),
    #[error("weighted parameter is singular at z = 1")]
    Singular,
    #[error("{0} is not a robust loss")]
    NotRobust(&'static str),
    #[error("degenerate probe grid: {0}")]
    DegenerateGrid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossFunction {
    /// `max(0, 1 - z)`
    Hinge,
    /// `ln(1 + e^{-z})`
    Logistic,
    /// Hinge truncated at `1 - s_star` for `z < s_star`.
    Ramp { s_star: f64 },
    /// `(1 - s_star) / (1 + e^{alpha (z + beta)})`
    SmoothRamp { s_star: f64, alpha: f64, beta: f64 },
    /// `e^{-e^{c z}}`
    ReversedGompertz { c: f64 },
}

impl LossFunction {
    pub fn ramp(s_star: f64) -> Result<Self, LossError> {
        let l = LossFunction::Ramp { s_star };
        l.validate()?;
        Ok(l)
    }

    pub fn smooth_ramp(s_star: f64, alpha: f64, beta: f64) -> Result<Self, LossError> {
        let l = LossFunction::SmoothRamp {
            s_star,
            alpha,
            beta,
        };
        l.validate()?;
        Ok(l)
    }

    pub fn reversed_gompertz(c: f64) -> Result<Self, LossError> {
        let l = LossFunction::ReversedGompertz { c };
        l.validate()?;
        Ok(l)
    }

    /// Smooth Ramp with the default triple `(s*, alpha, beta) = (-1, 2, -0.03)`.
    pub fn default_smooth_ramp() -> Self {
        LossFunction::SmoothRamp {
            s_star: -1.0,
            alpha: 2.0,
            beta: -0.03,
        }
    }

    /// Reversed Gompertz with `c* = 2`.
    pub fn default_reversed_gompertz() -> Self {
        LossFunction::ReversedGompertz { c: 2.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossFunction::Hinge => "hinge",
            LossFunction::Logistic => "log",
            LossFunction::Ramp { .. } => "ramp",
            LossFunction::SmoothRamp { .. } => "sramp",
            LossFunction::ReversedGompertz { .. } => "rgomp",
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(LossError::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )))
            }
        };
        match *self {
            LossFunction::Hinge | LossFunction::Logistic => Ok(()),
            LossFunction::Ramp { s_star } => {
                finite("s*", s_star)?;
                check_s_star(s_star)
            }
            LossFunction::SmoothRamp {
                s_star,
                alpha,
                beta,
            } => {
                finite("s*", s_star)?;
                finite("alpha", alpha)?;
                finite("beta", beta)?;
                check_s_star(s_star)?;
                if alpha <= 0.0 {
                    return Err(LossError::InvalidParameter(format!(
                        "alpha must be positive, got {alpha}"
                    )));
                }
                Ok(())
            }
            LossFunction::ReversedGompertz { c } => {
                finite("c*", c)?;
                if c <= 0.0 {
                    return Err(LossError::InvalidParameter(format!(
                        "c* must be positive, got {c}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// True for the bounded smooth losses trained by the robust SGD updates.
    pub fn is_robust(&self) -> bool {
        matches!(
            self,
            LossFunction::SmoothRamp { .. } | LossFunction::ReversedGompertz { .. }
        )
    }

    /// True when `r` is continuously differentiable everywhere.
    pub fn is_smooth(&self) -> bool {
        matches!(
            self,
            LossFunction::Logistic
                | LossFunction::SmoothRamp { .. }
                | LossFunction::ReversedGompertz { .. }
        )
    }

    pub fn value(&self, z: f64) -> f64 {
        match *self {
            LossFunction::Hinge => (1.0 - z).max(0.0),
            LossFunction::Logistic => {
                // ln(1 + e^{-z}) = max(-z, 0) + ln(1 + e^{-|z|})
                (-z).max(0.0) + (-z.abs()).exp().ln_1p()
            }
            LossFunction::Ramp { s_star } => {
                if z >= 1.0 {
                    0.0
                } else if z >= s_star {
                    1.0 - z
                } else {
                    1.0 - s_star
                }
            }
            LossFunction::SmoothRamp {
                s_star,
                alpha,
                beta,
            } => (1.0 - s_star) / (1.0 + (alpha * (z + beta)).exp()),
            LossFunction::ReversedGompertz { c } => (-(c * z).exp()).exp(),
        }
    }

    /// `r'(z)`. Kinked losses return the subgradient of the interval to the
    /// left of each kink at `z = s*`, and zero at `z = 1`.
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            LossFunction::Hinge => {
                if z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            // -1 / (1 + e^z)
            LossFunction::Logistic => {
                if z >= 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
            LossFunction::Ramp { s_star } => {
                if z >= s_star && z < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            LossFunction::SmoothRamp {
                s_star,
                alpha,
                beta,
            } => {
                // e^u / (1 + e^u)^2 is even in u; evaluate with e^{-|u|} to avoid overflow.
                let e = (-(alpha * (z + beta)).abs()).exp();
                -(1.0 - s_star) * alpha * e / ((1.0 + e) * (1.0 + e))
            }
            LossFunction::ReversedGompertz { c } => {
                let cz = c * z;
                -c * (cz - cz.exp()).exp()
            }
        }
    }

    /// `sup_z r(z)` for the bounded losses, `None` for hinge and logistic.
    pub fn upper_bound(&self) -> Option<f64> {
        match *self {
            LossFunction::Hinge | LossFunction::Logistic => None,
            LossFunction::Ramp { s_star } | LossFunction::SmoothRamp { s_star, .. } => {
                Some(1.0 - s_star)
            }
            LossFunction::ReversedGompertz { .. } => Some(1.0),
        }
    }

    /// Weighted parameter `phi(z) = -r'(z) / (1 - z)`: how strongly an instance
    /// with margin `z` steers the update. Defined for the robust losses only.
    pub fn phi(&self, z: f64) -> Result<f64, LossError> {
        if !self.is_robust() {
            return Err(LossError::NotRobust(self.name()));
        }
        if z == 1.0 {
            return Err(LossError::Singular);
        }
        Ok(-self.derivative(z) / (1.0 - z))
    }
}

fn check_s_star(s_star: f64) -> Result<(), LossError> {
    if s_star < 1.0 {
        Ok(())
    } else {
        Err(LossError::InvalidParameter(format!(
            "s* must be below 1, got {s_star}"
        )))
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LossFunction::Hinge => write!(f, "hinge"),
            LossFunction::Logistic => write!(f, "log"),
            LossFunction::Ramp { s_star } => write!(f, "ramp:s={s_star}"),
            LossFunction::SmoothRamp {
                s_star,
                alpha,
                beta,
            } => {
                write!(f, "sramp:s={s_star},a={alpha},b={beta}")
            }
            LossFunction::ReversedGompertz { c } => write!(f, "rgomp:c={c}"),
        }
    }
}

/// Parses `hinge`, `log`, `ramp[:s=..]`, `sramp[:s=..,a=..,b=..]`, `rgomp[:c=..]`.
///
/// `sramp:s=X` without `a`/`b` fits the pair to the Ramp loss for that `s*`.
impl FromStr for LossFunction {
    type Err = LossError;

    fn from_str(spec: &str) -> Result<Self, Self::Err> {
        let bad = || LossError::BadSpec(spec.to_string());
        let (kind, rest) = match spec.split_once(':') {
            Some((k, r)) => (k.trim(), r.trim()),
            None => (spec.trim(), ""),
        };
        let mut params = Vec::new();
        for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            params.push((k.trim().to_string(), v));
        }
        let get = |key: &str| params.iter().find(|(k, _)| k == key).map(|&(_, v)| v);
        let allow = |keys: &[&str]| {
            if params.iter().all(|(k, _)| keys.contains(&k.as_str())) {
                Ok(())
            } else {
                Err(bad())
            }
        };
        match kind {
            "hinge" => {
                allow(&[])?;
                Ok(LossFunction::Hinge)
            }
            "log" | "logistic" => {
                allow(&[])?;
                Ok(LossFunction::Logistic)
            }
            "ramp" => {
                allow(&["s"])?;
                LossFunction::ramp(get("s").unwrap_or(-1.0))
            }
            "sramp" | "smooth-ramp" => {
                allow(&["s", "a", "b"])?;
                match (get("s"), get("a"), get("b")) {
                    (None, None, None) => Ok(LossFunction::default_smooth_ramp()),
                    (s, Some(a), Some(b)) => LossFunction::smooth_ramp(s.unwrap_or(-1.0), a, b),
                    (Some(s), None, None) => {
                        check_s_star(s)?;
                        let fit = fit_smooth_ramp(s, &fit::default_fit_grid(s))?;
                        LossFunction::smooth_ramp(s, fit.alpha, fit.beta)
                    }
                    _ => Err(bad()),
                }
            }
            "rgomp" | "reversed-gompertz" => {
                allow(&["c"])?;
                LossFunction::reversed_gompertz(get("c").unwrap_or(2.0))
            }
            _ => Err(bad()),
        }
    }
}
