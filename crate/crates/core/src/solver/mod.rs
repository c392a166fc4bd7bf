//! Single-example SGD training of linear classifiers.
//!
//! [`train_sgdrl`] runs the robust-loss algorithm with its closed-form
//! updates; [`train_sgd_generic`], [`train_asgd`] and [`train_pegasos`] are
//! the baselines. All of them share one epoch loop: reshuffle, visit every
//! instance once, then take either the last iterate (option A) or the
//! within-epoch mean (option B) as the epoch iterate.

mod eval;
mod pegasos;
mod sgd;

pub use eval::{
    classify, error_rate_pct, objective_at, predict_score, primal_objective, test_error_rate,
};
pub use pegasos::train_pegasos;
pub use sgd::{generic_update, robust_update, train_asgd, train_sgd_generic, train_sgdrl};

use crate::data::SparseVector;
use crate::loss::{LossError, LossFunction};
use serde::{Deserialize, Serialize};

/// Any weight beyond this magnitude aborts training.
pub const DIVERGENCE_LIMIT: f64 = 1e15;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyDataset,
    #[error("{solver} does not accept the {loss} loss")]
    UnsupportedLoss {
        solver: &'static str,
        loss: &'static str,
    },
    #[error("weights diverged at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageOption {
    /// Epoch iterate is the last inner iterate.
    A,
    /// Epoch iterate is the mean of the inner iterates.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// A constant-1 feature is appended and regularized with the rest.
    Augmented,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSchedule {
    Constant,
    /// `eta_t = 1 / (lambda t)`, `t` counted from 1 across epochs.
    InverseT,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub eta: f64,
    pub max_epochs: usize,
    pub average: AverageOption,
    pub seed: u64,
    pub bias: BiasMode,
    pub eta_schedule: EtaSchedule,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-4,
            eta: 0.1,
            max_epochs: 15,
            average: AverageOption::A,
            seed: 0,
            bias: BiasMode::Augmented,
            eta_schedule: EtaSchedule::Constant,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be finite and > 0, got {}", self.eta));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.eta_schedule == EtaSchedule::InverseT && self.lambda <= 0.0 {
            return bad("the 1/(lambda t) schedule needs lambda > 0".into());
        }
        Ok(())
    }

    pub(crate) fn eta_at(&self, t: u64) -> f64 {
        match self.eta_schedule {
            EtaSchedule::Constant => self.eta,
            EtaSchedule::InverseT => 1.0 / (self.lambda * t as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    /// Feature weights, followed by the bias weight when `bias_mode` is augmented.
    pub weights: Vec<f64>,
    pub bias_mode: BiasMode,
    pub loss: LossFunction,
    pub config: SolverConfig,
}

impl Model {
    pub fn zeros(dimension: usize, loss: LossFunction, config: SolverConfig) -> Self {
        let len = dimension + usize::from(config.bias == BiasMode::Augmented);
        Self {
            weights: vec![0.0; len],
            bias_mode: config.bias,
            loss,
            config,
        }
    }

    pub fn dimension(&self) -> usize {
        self.weights.len() - usize::from(self.bias_mode == BiasMode::Augmented)
    }

    pub fn bias(&self) -> f64 {
        match self.bias_mode {
            BiasMode::Augmented => *self.weights.last().unwrap_or(&0.0),
            BiasMode::None => 0.0,
        }
    }

    pub fn score(&self, x: &SparseVector) -> f64 {
        predict_score(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Primal objective of the epoch iterate on the training set.
    pub objective: f64,
    pub train_error_pct: f64,
    pub test_error_pct: Option<f64>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub records: Vec<EpochRecord>,
}

impl EpochTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    /// `epoch,objective,train_err_pct,test_err_pct,elapsed_s` rows; an absent
    /// test error is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,objective,train_err_pct,test_err_pct,elapsed_s\n");
        for r in &self.records {
            let test = r.test_error_pct.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.objective, r.train_error_pct, test, r.elapsed_seconds
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig {
                eta: 0.0,
                ..Default::default()
            },
            SolverConfig {
                lambda: -1.0,
                ..Default::default()
            },
            SolverConfig {
                max_epochs: 0,
                ..Default::default()
            },
            SolverConfig {
                lambda: 0.0,
                eta_schedule: EtaSchedule::InverseT,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn model_layout() {
        let m = Model::zeros(3, LossFunction::Hinge, SolverConfig::default());
        assert_eq!((m.weights.len(), m.dimension()), (4, 3));
        let c = SolverConfig {
            bias: BiasMode::None,
            ..Default::default()
        };
        let m = Model::zeros(3, LossFunction::Hinge, c);
        assert_eq!((m.weights.len(), m.dimension(), m.bias()), (3, 3, 0.0));
    }

    #[test]
    fn trace_csv_shape() {
        let t = EpochTrace {
            records: vec![EpochRecord {
                epoch: 1,
                objective: 0.5,
                train_error_pct: 10.0,
                test_error_pct: None,
                elapsed_seconds: 0.25,
            }],
        };
        assert_eq!(
            t.to_csv(),
            "epoch,objective,train_err_pct,test_err_pct,elapsed_s\n1,0.5,10,,0.25\n"
        );
    }
}
