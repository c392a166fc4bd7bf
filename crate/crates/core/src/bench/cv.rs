use super::{train_method, BenchError, Method, MethodSettings};
use crate::data::{kfold_indices, Dataset};
use crate::rng::derive_seed;
use crate::solver::{test_error_rate, SolverError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Means closer than this count as tied.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub lambda: f64,
    pub mean_error_pct: f64,
    pub fold_errors_pct: Vec<f64>,
    /// Folds whose training diverged; each counts as 100% error.
    pub diverged_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub method: Method,
    pub folds: usize,
    pub seed: u64,
    pub rows: Vec<CvRow>,
    pub selected_lambda: f64,
}

/// Lowest mean validation error; ties go to the larger `lambda`, then to the
/// later row.
pub fn select_lambda(rows: &[CvRow]) -> Option<f64> {
    let best = rows
        .iter()
        .map(|r| r.mean_error_pct)
        .fold(f64::INFINITY, f64::min);
    rows.iter()
        .filter(|r| r.mean_error_pct <= best + TIE_TOLERANCE)
        .map(|r| r.lambda)
        .reduce(|a, b| if b >= a { b } else { a })
}

/// k-fold validation error of `method` for every `lambda` in the grid. All
/// grid points see the same folds and the same per-fold training seed.
pub fn cross_validate(
    method: Method,
    data: &Dataset,
    settings: &MethodSettings,
    lambda_grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<CvReport, BenchError> {
    if lambda_grid.is_empty() {
        return Err(BenchError::InvalidSpec("lambda grid is empty".into()));
    }
    let parts = kfold_indices(data.len(), folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = parts
        .iter()
        .map(|held| (data.without(held), data.subset(held)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..lambda_grid.len())
        .flat_map(|l| (0..folds).map(move |f| (l, f)))
        .collect();
    let errors = jobs
        .par_iter()
        .map(|&(l, f)| {
            let (train, valid) = &splits[f];
            let fold_seed = derive_seed(seed, &[f as u64]);
            match train_method(method, train, settings, lambda_grid[l], fold_seed, None) {
                Ok((model, _)) => Ok((test_error_rate(&model, valid)?, false)),
                Err(SolverError::Diverged { .. }) => Ok((100.0, true)),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<Vec<(f64, bool)>, BenchError>>()?;
    let rows: Vec<CvRow> = lambda_grid
        .iter()
        .enumerate()
        .map(|(l, &lambda)| {
            let chunk = &errors[l * folds..(l + 1) * folds];
            let fold_errors_pct: Vec<f64> = chunk.iter().map(|e| e.0).collect();
            CvRow {
                lambda,
                mean_error_pct: fold_errors_pct.iter().sum::<f64>() / folds as f64,
                fold_errors_pct,
                diverged_folds: chunk.iter().filter(|e| e.1).count(),
            }
        })
        .collect();
    let selected_lambda = select_lambda(&rows).expect("grid is non-empty");
    Ok(CvReport {
        method,
        folds,
        seed,
        rows,
        selected_lambda,
    })
}
