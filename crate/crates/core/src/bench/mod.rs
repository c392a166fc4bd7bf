//! Cross-validation and repeated noisy-label experiments over the solvers.

mod cv;
mod experiment;

pub use cv::{cross_validate, select_lambda, CvReport, CvRow};
pub use experiment::{
    run_bench, run_bench_with_threads, threads_from_env, BenchReport, CellReport, DataSummary,
    ExperimentSpec, ResultRow, SolverDefaults, SyntheticSource, TrialRecord, RESULTS_CSV_HEADER,
    SCHEMA_VERSION, THREADS_ENV,
};

use crate::data::{DataError, Dataset};
use crate::loss::LossFunction;
use crate::solver::{
    train_asgd, train_pegasos, train_sgd_generic, train_sgdrl, EpochTrace, EtaSchedule, Model,
    SolverConfig, SolverError,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Hard ceiling on Pegasos epochs regardless of `10 / lambda`.
pub const PEGASOS_EPOCH_CEILING: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("cannot read experiment file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sgd-sramp")]
    SgdSramp,
    #[serde(rename = "sgd-rgomp")]
    SgdRgomp,
    #[serde(rename = "sgd-hinge")]
    SgdHinge,
    #[serde(rename = "sgd-log")]
    SgdLog,
    #[serde(rename = "sgd-ramp")]
    SgdRamp,
    #[serde(rename = "asgd-log")]
    AsgdLog,
    #[serde(rename = "pegasos")]
    Pegasos,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::SgdSramp,
        Method::SgdRgomp,
        Method::SgdHinge,
        Method::SgdLog,
        Method::SgdRamp,
        Method::AsgdLog,
        Method::Pegasos,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::SgdSramp => "sgd-sramp",
            Method::SgdRgomp => "sgd-rgomp",
            Method::SgdHinge => "sgd-hinge",
            Method::SgdLog => "sgd-log",
            Method::SgdRamp => "sgd-ramp",
            Method::AsgdLog => "asgd-log",
            Method::Pegasos => "pegasos",
        }
    }

    /// Stable integer fed into seed derivation.
    pub fn id(self) -> u64 {
        Method::ALL.iter().position(|&m| m == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| BenchError::InvalidSpec(format!("unknown method {s:?}")))
    }
}

/// Everything except `lambda` and `seed` needed to train any method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodSettings {
    /// Step size, epoch count, averaging option and bias handling.
    pub solver: SolverConfig,
    pub sramp: LossFunction,
    pub rgomp: LossFunction,
    pub ramp: LossFunction,
    /// Upper limit on Pegasos epochs; see [`pegasos_epochs`].
    pub pegasos_epoch_cap: usize,
}

impl Default for MethodSettings {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            sramp: LossFunction::default_smooth_ramp(),
            rgomp: LossFunction::default_reversed_gompertz(),
            ramp: LossFunction::Ramp { s_star: -1.0 },
            pegasos_epoch_cap: 50,
        }
    }
}

impl MethodSettings {
    pub fn loss_for(&self, method: Method) -> LossFunction {
        match method {
            Method::SgdSramp => self.sramp,
            Method::SgdRgomp => self.rgomp,
            Method::SgdHinge | Method::Pegasos => LossFunction::Hinge,
            Method::SgdLog | Method::AsgdLog => LossFunction::Logistic,
            Method::SgdRamp => self.ramp,
        }
    }

    /// Epochs `method` runs for at `lambda`.
    pub fn epochs_for(&self, method: Method, lambda: f64) -> usize {
        match method {
            Method::Pegasos => pegasos_epochs(lambda, self.pegasos_epoch_cap),
            _ => self.solver.max_epochs,
        }
    }

    pub fn config_for(&self, method: Method, lambda: f64, seed: u64) -> SolverConfig {
        let mut c = SolverConfig {
            lambda,
            seed,
            max_epochs: self.epochs_for(method, lambda),
            ..self.solver
        };
        if method == Method::Pegasos {
            c.eta_schedule = EtaSchedule::InverseT;
        }
        c
    }
}

/// `min(ceil(10 / lambda), 1e5, cap)`, at least one.
pub fn pegasos_epochs(lambda: f64, cap: usize) -> usize {
    let nominal = if lambda > 0.0 {
        (10.0 / lambda).ceil().min(PEGASOS_EPOCH_CEILING as f64) as usize
    } else {
        PEGASOS_EPOCH_CEILING
    };
    nominal.min(cap).max(1)
}

pub fn train_method(
    method: Method,
    train: &Dataset,
    settings: &MethodSettings,
    lambda: f64,
    seed: u64,
    eval_set: Option<&Dataset>,
) -> Result<(Model, EpochTrace), SolverError> {
    let config = settings.config_for(method, lambda, seed);
    let loss = settings.loss_for(method);
    match method {
        Method::SgdSramp | Method::SgdRgomp => train_sgdrl(train, &loss, &config, eval_set),
        Method::SgdHinge | Method::SgdLog | Method::SgdRamp => {
            train_sgd_generic(train, &loss, &config, eval_set)
        }
        Method::AsgdLog => train_asgd(train, &loss, &config, eval_set),
        Method::Pegasos => train_pegasos(train, &config, eval_set),
    }
}
