use super::{BiasMode, Model, SolverError};
use crate::data::{Dataset, Label, SparseVector};
use crate::loss::LossFunction;

/// Raw score `<w, x> + b` for a weight layout with optional trailing bias.
pub(crate) fn raw_score(w: &[f64], bias: BiasMode, x: &SparseVector) -> f64 {
    match bias {
        BiasMode::Augmented => {
            let (feat, b) = w.split_at(w.len() - 1);
            x.dot(feat) + b[0]
        }
        BiasMode::None => x.dot(w),
    }
}

pub fn predict_score(model: &Model, x: &SparseVector) -> f64 {
    raw_score(&model.weights, model.bias_mode, x)
}

/// `sign(score)` with ties going to `+1`.
pub fn classify(model: &Model, x: &SparseVector) -> Label {
    Label::from_sign(predict_score(model, x))
}

/// `(lambda / 2) ||w||^2 + mean_i r(y_i (<w, x_i> + b))`. The bias weight,
/// when present, is part of `w`.
pub fn objective_at(
    w: &[f64],
    bias: BiasMode,
    data: &Dataset,
    loss: &LossFunction,
    lambda: f64,
) -> Result<f64, SolverError> {
    if data.is_empty() {
        return Err(SolverError::EmptyDataset);
    }
    let reg = 0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>();
    let total: f64 = data
        .instances
        .iter()
        .map(|inst| loss.value(inst.label.as_f64() * raw_score(w, bias, &inst.features)))
        .sum();
    Ok(reg + total / data.len() as f64)
}

pub fn primal_objective(
    model: &Model,
    data: &Dataset,
    loss: &LossFunction,
    lambda: f64,
) -> Result<f64, SolverError> {
    objective_at(&model.weights, model.bias_mode, data, loss, lambda)
}

pub fn error_rate_pct(w: &[f64], bias: BiasMode, data: &Dataset) -> Result<f64, SolverError> {
    if data.is_empty() {
        return Err(SolverError::EmptyDataset);
    }
    let wrong = data
        .instances
        .iter()
        .filter(|inst| Label::from_sign(raw_score(w, bias, &inst.features)) != inst.label)
        .count();
    Ok(100.0 * wrong as f64 / data.len() as f64)
}

/// Percentage of misclassified instances.
pub fn test_error_rate(model: &Model, test: &Dataset) -> Result<f64, SolverError> {
    error_rate_pct(&model.weights, model.bias_mode, test)
}
