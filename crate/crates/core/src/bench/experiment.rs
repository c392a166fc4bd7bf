use super::{cross_validate, train_method, BenchError, CvReport, Method, MethodSettings};
use crate::analysis::run_variance;
use crate::data::{
    flip_labels, normalize_apply, normalize_fit, read_libsvm_file, split_train_test,
    synth_gaussian, Dataset,
};
use crate::loss::LossFunction;
use crate::rng::derive_seed;
use crate::solver::{primal_objective, test_error_rate, AverageOption, BiasMode, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_CSV_HEADER: &str =
    "method,noise,mean_err,std_err,variance,mean_obj,lambda,epochs";
/// Caps the worker threads used for cells, trials and folds.
pub const THREADS_ENV: &str = "ROBUST_SGD_THREADS";

// Stream tags mixed into the master seed.
const STREAM_SPLIT: u64 = 1;
const STREAM_SYNTH: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_TRIAL: u64 = 4;
const STREAM_CV: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub n: usize,
    pub dim: usize,
    pub separation: f64,
    /// Defaults to a stream derived from the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverDefaults {
    pub eta: f64,
    pub epochs: usize,
    pub average: AverageOption,
    pub bias: BiasMode,
}

impl Default for SolverDefaults {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            eta: c.eta,
            epochs: c.max_epochs,
            average: c.average,
            bias: c.bias,
        }
    }
}

/// One benchmark run, read from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSpec {
    pub dataset_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    /// Held-out share when no separate test file is given.
    pub test_fraction: f64,
    pub synthetic: Option<SyntheticSource>,
    /// Scale features to `[0, 1]` using training-split statistics.
    pub normalize: bool,
    pub noise_fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub cv_folds: usize,
    pub lambda_grid: Vec<f64>,
    /// Skips cross-validation when set.
    pub lambda: Option<f64>,
    /// Cross-validate every trial instead of once per cell on trial 0.
    pub cv_per_trial: bool,
    /// Reuse trial 0's label corruption for every trial.
    pub freeze_noise: bool,
    pub master_seed: u64,
    pub solver: SolverDefaults,
    pub sramp: String,
    pub rgomp: String,
    pub ramp: String,
    pub pegasos_epoch_cap: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let m = MethodSettings::default();
        Self {
            dataset_path: None,
            test_path: None,
            test_fraction: 0.2,
            synthetic: None,
            normalize: true,
            noise_fractions: vec![0.0, 0.2, 0.4, 0.6],
            methods: Method::ALL.to_vec(),
            repeats: 10,
            cv_folds: 10,
            lambda_grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
            lambda: None,
            cv_per_trial: false,
            freeze_noise: false,
            master_seed: 0,
            solver: SolverDefaults::default(),
            sramp: m.sramp.to_string(),
            rgomp: m.rgomp.to_string(),
            ramp: m.ramp.to_string(),
            pegasos_epoch_cap: m.pegasos_epoch_cap,
        }
    }
}

impl ExperimentSpec {
    /// Reads TOML, or JSON when the extension is `.json`. Relative dataset
    /// paths are taken relative to the experiment file.
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)?;
        let mut spec: ExperimentSpec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| BenchError::InvalidSpec(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| BenchError::InvalidSpec(e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.dataset_path, &mut spec.test_path]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn settings(&self) -> Result<MethodSettings, BenchError> {
        let parse = |s: &str| {
            s.parse::<LossFunction>()
                .map_err(|e| BenchError::InvalidSpec(format!("{s:?}: {e}")))
        };
        let settings = MethodSettings {
            solver: SolverConfig {
                eta: self.solver.eta,
                max_epochs: self.solver.epochs,
                average: self.solver.average,
                bias: self.solver.bias,
                ..SolverConfig::default()
            },
            sramp: parse(&self.sramp)?,
            rgomp: parse(&self.rgomp)?,
            ramp: parse(&self.ramp)?,
            pegasos_epoch_cap: self.pegasos_epoch_cap,
        };
        let kinds = [
            (
                matches!(settings.sramp, LossFunction::SmoothRamp { .. }),
                "sramp",
            ),
            (
                matches!(settings.rgomp, LossFunction::ReversedGompertz { .. }),
                "rgomp",
            ),
            (matches!(settings.ramp, LossFunction::Ramp { .. }), "ramp"),
        ];
        if let Some((_, name)) = kinds.iter().find(|(ok, _)| !ok) {
            return Err(BenchError::InvalidSpec(format!(
                "{name} must name a loss of that family"
            )));
        }
        settings.solver.validate()?;
        Ok(settings)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.dataset_path.is_some() == self.synthetic.is_some() {
            return bad("give exactly one of dataset_path and synthetic".into());
        }
        if self.test_path.is_some() && self.synthetic.is_some() {
            return bad("test_path needs dataset_path".into());
        }
        if self.test_path.is_none() && !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            ));
        }
        if let Some(p) = self
            .noise_fractions
            .iter()
            .find(|p| !(0.0..=1.0).contains(*p))
        {
            return bad(format!("noise fraction {p} outside [0, 1]"));
        }
        if self.noise_fractions.is_empty() || self.methods.is_empty() {
            return bad("noise_fractions and methods must be non-empty".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.pegasos_epoch_cap == 0 {
            return bad("pegasos_epoch_cap must be at least 1".into());
        }
        match self.lambda {
            Some(l) if !(l >= 0.0 && l.is_finite()) => {
                return bad(format!("lambda {l} is not a finite non-negative value"))
            }
            Some(_) => {}
            None => {
                if self.cv_folds < 2 {
                    return bad("cv_folds must be at least 2".into());
                }
                if self.lambda_grid.is_empty()
                    || self
                        .lambda_grid
                        .iter()
                        .any(|l| !(*l >= 0.0 && l.is_finite()))
                {
                    return bad("lambda_grid must be non-empty, finite and non-negative".into());
                }
            }
        }
        self.settings().map(|_| ())
    }

    /// Seed of trial `trial` in cell `(method, noise)`.
    pub fn trial_seed(&self, method: Method, noise: f64, trial: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[STREAM_TRIAL, method.id(), noise.to_bits(), trial as u64],
        )
    }

    /// Label-corruption seed; shared by every method so they see the same noise.
    pub fn noise_seed(&self, noise: f64, trial: usize) -> u64 {
        let k = if self.freeze_noise { 0 } else { trial as u64 };
        derive_seed(self.master_seed, &[STREAM_NOISE, noise.to_bits(), k])
    }

    /// Fold-split seed for cross-validation.
    pub fn cv_seed(&self, noise: f64, trial: usize) -> u64 {
        derive_seed(
            self.master_seed,
            &[STREAM_CV, noise.to_bits(), trial as u64],
        )
    }

    /// Clean train/test pair after splitting and normalization.
    pub fn prepare_data(&self) -> Result<(Dataset, Dataset), BenchError> {
        self.validate()?;
        let split_seed = derive_seed(self.master_seed, &[STREAM_SPLIT]);
        let (train, test) = match (&self.dataset_path, &self.test_path, &self.synthetic) {
            (Some(tr), Some(te), _) => (read_libsvm_file(tr)?, read_libsvm_file(te)?),
            (Some(tr), None, _) => {
                split_train_test(&read_libsvm_file(tr)?, self.test_fraction, split_seed)?
            }
            (None, _, Some(s)) => {
                let seed = s
                    .seed
                    .unwrap_or_else(|| derive_seed(self.master_seed, &[STREAM_SYNTH]));
                split_train_test(
                    &synth_gaussian(s.n, s.dim, s.separation, seed)?,
                    self.test_fraction,
                    split_seed,
                )?
            }
            _ => unreachable!("validated"),
        };
        let dim = train.dimension.max(test.dimension);
        let (train, test) = (train.with_dimension(dim), test.with_dimension(dim));
        if !self.normalize {
            return Ok((train, test));
        }
        let params = normalize_fit(&train);
        Ok((
            normalize_apply(&train, &params),
            normalize_apply(&test, &params),
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub noise_seed: u64,
    pub lambda: f64,
    pub epochs: usize,
    pub test_error_pct: f64,
    /// Objective on the (noisy) training labels.
    pub final_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: Method,
    pub noise_fraction: f64,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
    pub variance: f64,
    pub mean_final_objective: f64,
    /// Epochs of trial 0.
    pub epochs: usize,
    /// Lambda of trial 0; per-trial values are in the trial records.
    pub lambda_selected: f64,
    pub seeds_used: Vec<u64>,
}

impl ResultRow {
    pub fn from_trials(method: Method, noise_fraction: f64, trials: &[TrialRecord]) -> Self {
        let errs: Vec<f64> = trials.iter().map(|t| t.test_error_pct).collect();
        let n = errs.len() as f64;
        let variance = run_variance(&errs).unwrap_or(0.0);
        Self {
            method,
            noise_fraction,
            mean_error_pct: errs.iter().sum::<f64>() / n,
            std_error_pct: variance.sqrt(),
            variance,
            mean_final_objective: trials.iter().map(|t| t.final_objective).sum::<f64>() / n,
            epochs: trials[0].epochs,
            lambda_selected: trials[0].lambda,
            seeds_used: trials.iter().map(|t| t.seed).collect(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.noise_fraction,
            self.mean_error_pct,
            self.std_error_pct,
            self.variance,
            self.mean_final_objective,
            self.lambda_selected,
            self.epochs
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub method: Method,
    pub noise_fraction: f64,
    pub error: Option<String>,
    pub cv: Vec<CvReport>,
    pub trials: Vec<TrialRecord>,
    pub row: Option<ResultRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub train_size: usize,
    pub test_size: usize,
    pub dimension: usize,
    pub train_source: String,
    pub test_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub spec: ExperimentSpec,
    pub data: DataSummary,
    /// Effective ceiling on Pegasos epochs in place of `10 / lambda`.
    pub pegasos_epoch_cap: usize,
    pub cells: Vec<CellReport>,
}

impl BenchReport {
    pub fn rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.cells.iter().filter_map(|c| c.row.as_ref())
    }

    pub fn row(&self, method: Method, noise: f64) -> Option<&ResultRow> {
        self.rows()
            .find(|r| r.method == method && r.noise_fraction == noise)
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellReport> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    /// Rows of successful cells, in cell order.
    pub fn results_csv(&self) -> String {
        let mut out = format!("{RESULTS_CSV_HEADER}\n");
        for r in self.rows() {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

/// Thread count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// [`run_bench_with_threads`] with the thread cap read from the environment.
pub fn run_bench(spec: &ExperimentSpec) -> Result<BenchReport, BenchError> {
    run_bench_with_threads(spec, threads_from_env())
}

/// Runs every `(method, noise)` cell. Setup problems are errors; failures
/// inside a cell are recorded in that cell. Results do not depend on the
/// thread count.
pub fn run_bench_with_threads(
    spec: &ExperimentSpec,
    threads: Option<usize>,
) -> Result<BenchReport, BenchError> {
    let settings = spec.settings()?;
    let (train, test) = spec.prepare_data()?;
    let cells: Vec<(Method, f64)> = spec
        .methods
        .iter()
        .flat_map(|&m| spec.noise_fractions.iter().map(move |&p| (m, p)))
        .collect();
    let run = || -> Vec<CellReport> {
        cells
            .par_iter()
            .map(|&(m, p)| run_cell(spec, &settings, &train, &test, m, p))
            .collect()
    };
    let cells = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BenchError::InvalidSpec(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        spec: spec.clone(),
        data: DataSummary {
            train_size: train.len(),
            test_size: test.len(),
            dimension: train.dimension,
            train_source: train.meta.source.clone(),
            test_source: test.meta.source.clone(),
        },
        pegasos_epoch_cap: settings.pegasos_epoch_cap,
        cells,
    })
}

fn run_cell(
    spec: &ExperimentSpec,
    settings: &MethodSettings,
    train: &Dataset,
    test: &Dataset,
    method: Method,
    noise: f64,
) -> CellReport {
    let mut cell = CellReport {
        method,
        noise_fraction: noise,
        error: None,
        cv: Vec::new(),
        trials: Vec::new(),
        row: None,
    };
    match cell_trials(spec, settings, train, test, method, noise) {
        Ok((cv, trials)) => {
            cell.row = Some(ResultRow::from_trials(method, noise, &trials));
            cell.cv = cv;
            cell.trials = trials;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn noisy_train(
    spec: &ExperimentSpec,
    train: &Dataset,
    noise: f64,
    trial: usize,
) -> Result<(Dataset, u64), BenchError> {
    let seed = spec.noise_seed(noise, trial);
    Ok((flip_labels(train, noise, seed)?, seed))
}

fn cell_trials(
    spec: &ExperimentSpec,
    settings: &MethodSettings,
    train: &Dataset,
    test: &Dataset,
    method: Method,
    noise: f64,
) -> Result<(Vec<CvReport>, Vec<TrialRecord>), BenchError> {
    let cv_on = |trial: usize, data: &Dataset| {
        cross_validate(
            method,
            data,
            settings,
            &spec.lambda_grid,
            spec.cv_folds,
            spec.cv_seed(noise, trial),
        )
    };
    let shared_cv = match (spec.lambda, spec.cv_per_trial) {
        (None, false) => Some(cv_on(0, &noisy_train(spec, train, noise, 0)?.0)?),
        _ => None,
    };
    let results = (0..spec.repeats)
        .into_par_iter()
        .map(|k| {
            let (noisy, noise_seed) = noisy_train(spec, train, noise, k)?;
            let own_cv = match (spec.lambda, &shared_cv) {
                (None, None) => Some(cv_on(k, &noisy)?),
                _ => None,
            };
            let lambda = spec
                .lambda
                .or(shared_cv.as_ref().map(|c| c.selected_lambda))
                .or(own_cv.as_ref().map(|c| c.selected_lambda))
                .expect("one lambda source is set");
            let seed = spec.trial_seed(method, noise, k);
            let (model, _) = train_method(method, &noisy, settings, lambda, seed, None)?;
            let record = TrialRecord {
                trial: k,
                seed,
                noise_seed,
                lambda,
                epochs: settings.epochs_for(method, lambda),
                test_error_pct: test_error_rate(&model, test)?,
                final_objective: primal_objective(&model, &noisy, &model.loss, lambda)?,
            };
            Ok((own_cv, record))
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let mut cv: Vec<CvReport> = shared_cv.into_iter().collect();
    let mut trials = Vec::with_capacity(results.len());
    for (c, r) in results {
        cv.extend(c);
        trials.push(r);
    }
    Ok((cv, trials))
}
