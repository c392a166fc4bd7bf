use super::eval::raw_score;
use super::sgd::{run_epochs, Reported};
use super::{EpochTrace, EtaSchedule, Model, SolverConfig, SolverError};
use crate::data::Dataset;
use crate::loss::LossFunction;

/// Hinge-loss Pegasos with single-example blocks: `eta_t = 1 / (lambda t)`,
/// a subgradient step, then projection onto the ball of radius `1 / sqrt(lambda)`.
pub fn train_pegasos(
    train: &Dataset,
    config: &SolverConfig,
    eval_set: Option<&Dataset>,
) -> Result<(Model, EpochTrace), SolverError> {
    if config.eta_schedule != EtaSchedule::InverseT {
        return Err(SolverError::InvalidConfig(
            "pegasos needs the inverse_t step schedule".into(),
        ));
    }
    config.validate()?;
    let lambda = config.lambda;
    let bias = config.bias;
    let radius_sq = 1.0 / lambda;
    run_epochs(
        train,
        eval_set,
        LossFunction::Hinge,
        config,
        Reported::EpochIterate,
        |w, inst, eta| {
            let y = inst.label.as_f64();
            let violated = y * raw_score(w, bias, &inst.features) < 1.0;
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if violated {
                let feat_len = w.len() - usize::from(bias == super::BiasMode::Augmented);
                for (i, v) in inst.features.entries() {
                    let k = i as usize - 1;
                    if k < feat_len {
                        w[k] += eta * y * v;
                    }
                }
                if bias == super::BiasMode::Augmented {
                    let last = w.len() - 1;
                    w[last] += eta * y;
                }
            }
            let norm_sq: f64 = w.iter().map(|v| v * v).sum();
            if norm_sq > radius_sq {
                let s = (radius_sq / norm_sq).sqrt();
                w.iter_mut().for_each(|v| *v *= s);
            }
        },
    )
}
