use super::eval::{error_rate_pct, objective_at, raw_score};
use super::{
    AverageOption, BiasMode, EpochRecord, EpochTrace, Model, SolverConfig, SolverError,
    DIVERGENCE_LIMIT,
};
use crate::data::{Dataset, Instance, SparseVector};
use crate::loss::LossFunction;
use crate::rng::SeededRng;
use std::time::Instant;

/// `w <- (1 - eta lambda) w + coef * [x, 1]`, the bias slot only when augmented.
fn shrink_and_add(
    w: &mut [f64],
    x: &SparseVector,
    coef: f64,
    eta: f64,
    lambda: f64,
    bias: BiasMode,
) {
    let shrink = 1.0 - eta * lambda;
    if shrink != 1.0 {
        w.iter_mut().for_each(|v| *v *= shrink);
    }
    if coef != 0.0 {
        let feat_len = w.len() - usize::from(bias == BiasMode::Augmented);
        for (i, v) in x.entries() {
            let k = i as usize - 1;
            if k < feat_len {
                w[k] += coef * v;
            }
        }
        if bias == BiasMode::Augmented {
            let last = w.len() - 1;
            w[last] += coef;
        }
    }
}

/// One step of the generic template `w <- w - eta (lambda w + r'(z) y x)`.
pub fn generic_update(
    w: &mut [f64],
    x: &SparseVector,
    y: f64,
    loss: &LossFunction,
    lambda: f64,
    eta: f64,
    bias: BiasMode,
) {
    let z = y * raw_score(w, bias, x);
    let coef = -eta * loss.derivative(z) * y;
    shrink_and_add(w, x, coef, eta, lambda, bias);
}

/// Closed-form robust updates. With `g = y (<w, x> + b)`:
///
/// * Smooth Ramp: `w - eta [lambda w - (1 - s*) alpha x y f / (1 + f)^2]`, `f = e^{alpha (g + beta)}`
/// * Reversed Gompertz: `w - eta [lambda w - c* x y e^{c* g - e^{c* g}}]`
pub fn robust_update(
    w: &mut [f64],
    x: &SparseVector,
    y: f64,
    loss: &LossFunction,
    lambda: f64,
    eta: f64,
    bias: BiasMode,
) -> Result<(), SolverError> {
    if !loss.is_robust() {
        return Err(SolverError::UnsupportedLoss {
            solver: "sgdrl",
            loss: loss.name(),
        });
    }
    robust_step(w, x, y, loss, lambda, eta, bias);
    Ok(())
}

fn robust_step(
    w: &mut [f64],
    x: &SparseVector,
    y: f64,
    loss: &LossFunction,
    lambda: f64,
    eta: f64,
    bias: BiasMode,
) {
    let g = raw_score(w, bias, x) * y;
    let weight = match *loss {
        LossFunction::SmoothRamp {
            s_star,
            alpha,
            beta,
        } => {
            let f = (alpha * (g + beta)).exp();
            // f / (1 + f)^2 -> 0 once f overflows
            let ratio = if f.is_finite() {
                f / ((1.0 + f) * (1.0 + f))
            } else {
                0.0
            };
            (1.0 - s_star) * alpha * ratio
        }
        LossFunction::ReversedGompertz { c } => {
            let cg = c * g;
            c * (cg - cg.exp()).exp()
        }
        _ => unreachable!("checked by the caller"),
    };
    shrink_and_add(w, x, eta * weight * y, eta, lambda, bias);
}

/// What the trainer reports as the model after each epoch.
#[derive(Clone, Copy, PartialEq)]
pub(crate) enum Reported {
    EpochIterate,
    /// Uniform mean of every inner iterate since the start of training.
    RunningAverage,
}

pub(crate) fn check_inputs(
    train: &Dataset,
    loss: &LossFunction,
    config: &SolverConfig,
) -> Result<(), SolverError> {
    config.validate()?;
    loss.validate()?;
    if train.is_empty() {
        return Err(SolverError::EmptyDataset);
    }
    Ok(())
}

pub(crate) fn run_epochs<F>(
    train: &Dataset,
    eval_set: Option<&Dataset>,
    loss: LossFunction,
    config: &SolverConfig,
    reported: Reported,
    mut step: F,
) -> Result<(Model, EpochTrace), SolverError>
where
    F: FnMut(&mut [f64], &Instance, f64),
{
    check_inputs(train, &loss, config)?;
    let start = Instant::now();
    let n = train.len();
    let mut model = Model::zeros(train.dimension, loss, *config);
    let len = model.weights.len();
    let mut epoch_iterate = vec![0.0; len];
    let mut running_avg = vec![0.0; len];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::new(config.seed);
    let mut t: u64 = 0;
    let mut trace = EpochTrace::default();

    for epoch in 1..=config.max_epochs {
        rng.shuffle(&mut order);
        let mut w = epoch_iterate.clone();
        let mut inner_sum = vec![
            0.0;
            if config.average == AverageOption::B {
                len
            } else {
                0
            }
        ];
        for (s, &i) in order.iter().enumerate() {
            t += 1;
            step(&mut w, &train.instances[i], config.eta_at(t));
            if w.iter().any(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
                return Err(SolverError::Diverged { epoch, step: s + 1 });
            }
            if !inner_sum.is_empty() {
                inner_sum.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
            }
            if reported == Reported::RunningAverage {
                let inv = 1.0 / t as f64;
                running_avg
                    .iter_mut()
                    .zip(&w)
                    .for_each(|(a, b)| *a += (b - *a) * inv);
            }
        }
        epoch_iterate = match config.average {
            AverageOption::A => w,
            AverageOption::B => inner_sum.iter().map(|v| v / n as f64).collect(),
        };
        let current = match reported {
            Reported::EpochIterate => &epoch_iterate,
            Reported::RunningAverage => &running_avg,
        };
        let objective = objective_at(current, config.bias, train, &loss, config.lambda)?;
        let train_error_pct = error_rate_pct(current, config.bias, train)?;
        let test_error_pct = match eval_set {
            Some(d) if !d.is_empty() => Some(error_rate_pct(current, config.bias, d)?),
            _ => None,
        };
        trace.records.push(EpochRecord {
            epoch,
            objective,
            train_error_pct,
            test_error_pct,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
    }

    model.weights = match reported {
        Reported::EpochIterate => epoch_iterate,
        Reported::RunningAverage => running_avg,
    };
    Ok((model, trace))
}

/// Robust-loss SGD: Smooth Ramp or Reversed Gompertz with the closed-form updates.
pub fn train_sgdrl(
    train: &Dataset,
    loss: &LossFunction,
    config: &SolverConfig,
    eval_set: Option<&Dataset>,
) -> Result<(Model, EpochTrace), SolverError> {
    if !loss.is_robust() {
        return Err(SolverError::UnsupportedLoss {
            solver: "sgdrl",
            loss: loss.name(),
        });
    }
    let (lambda, bias) = (config.lambda, config.bias);
    run_epochs(
        train,
        eval_set,
        *loss,
        config,
        Reported::EpochIterate,
        |w, inst, eta| {
            robust_step(
                w,
                &inst.features,
                inst.label.as_f64(),
                loss,
                lambda,
                eta,
                bias,
            )
        },
    )
}

/// Plain SGD on any loss through `r'`; kinks use the loss's subgradient choice.
pub fn train_sgd_generic(
    train: &Dataset,
    loss: &LossFunction,
    config: &SolverConfig,
    eval_set: Option<&Dataset>,
) -> Result<(Model, EpochTrace), SolverError> {
    let (lambda, bias) = (config.lambda, config.bias);
    run_epochs(
        train,
        eval_set,
        *loss,
        config,
        Reported::EpochIterate,
        |w, inst, eta| {
            generic_update(
                w,
                &inst.features,
                inst.label.as_f64(),
                loss,
                lambda,
                eta,
                bias,
            )
        },
    )
}

/// Averaged SGD: the plain SGD chain runs underneath and the returned model
/// (and every trace row) is the running mean of all iterates so far.
pub fn train_asgd(
    train: &Dataset,
    loss: &LossFunction,
    config: &SolverConfig,
    eval_set: Option<&Dataset>,
) -> Result<(Model, EpochTrace), SolverError> {
    let (lambda, bias) = (config.lambda, config.bias);
    let chain = SolverConfig {
        average: AverageOption::A,
        ..*config
    };
    run_epochs(
        train,
        eval_set,
        *loss,
        &chain,
        Reported::RunningAverage,
        |w, inst, eta| {
            generic_update(
                w,
                &inst.features,
                inst.label.as_f64(),
                loss,
                lambda,
                eta,
                bias,
            )
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm_str, synth_gaussian, Label};
    use crate::solver::{primal_objective, test_error_rate};
    use proptest::prelude::*;

    fn one_point(text: &str) -> Dataset {
        parse_libsvm_str(text).unwrap()
    }

    fn no_bias(lambda: f64, eta: f64) -> SolverConfig {
        SolverConfig {
            lambda,
            eta,
            max_epochs: 1,
            bias: BiasMode::None,
            ..Default::default()
        }
    }

    #[test]
    fn first_gompertz_step_from_zero() {
        // g = 0, so f = 0 - e^0 = -1 and w = eta * 2 * y * x * e^{-1}.
        let d = one_point("-1 1:0.5 2:-2\n");
        let eta = 0.1;
        let (m, _) = train_sgdrl(
            &d,
            &LossFunction::default_reversed_gompertz(),
            &no_bias(0.3, eta),
            None,
        )
        .unwrap();
        let e = (-1.0f64).exp();
        let expect = [eta * 2.0 * -1.0 * 0.5 * e, eta * 2.0 * -1.0 * -2.0 * e];
        for (a, b) in m.weights.iter().zip(expect) {
            assert!((a - b).abs() < 1e-16, "{a} vs {b}");
        }
    }

    #[test]
    fn robust_step_moves_along_label_when_unregularized() {
        let x = SparseVector::from_pairs(vec![(1, 0.7), (3, -1.3)]).unwrap();
        for loss in [
            LossFunction::default_smooth_ramp(),
            LossFunction::default_reversed_gompertz(),
        ] {
            for y in [1.0, -1.0] {
                let w0 = vec![0.2, -0.4, 0.9];
                let mut w = w0.clone();
                robust_update(&mut w, &x, y, &loss, 0.0, 0.5, BiasMode::None).unwrap();
                let delta: Vec<f64> = w.iter().zip(&w0).map(|(a, b)| a - b).collect();
                // delta = k * y * x for some k >= 0
                let k = delta[0] / (y * 0.7);
                assert!(k >= 0.0);
                assert!((delta[2] - k * y * -1.3).abs() < 1e-15);
                assert_eq!(delta[1], 0.0);
            }
        }
    }

    #[test]
    fn hinge_far_side_only_shrinks() {
        let x = SparseVector::from_pairs(vec![(1, 1.0)]).unwrap();
        let mut w = vec![5.0, 2.0];
        generic_update(
            &mut w,
            &x,
            1.0,
            &LossFunction::Hinge,
            0.1,
            0.5,
            BiasMode::None,
        );
        assert_eq!(w, vec![5.0 * 0.95, 2.0 * 0.95]);
    }

    #[test]
    fn sgdrl_rejects_baseline_losses() {
        let d = one_point("+1 1:1\n");
        assert!(matches!(
            train_sgdrl(&d, &LossFunction::Hinge, &SolverConfig::default(), None),
            Err(SolverError::UnsupportedLoss { .. })
        ));
        let empty = one_point("");
        assert!(matches!(
            train_sgdrl(
                &empty,
                &LossFunction::default_smooth_ramp(),
                &SolverConfig::default(),
                None
            ),
            Err(SolverError::EmptyDataset)
        ));
    }

    #[test]
    fn divergence_is_reported() {
        let d = one_point("+1 1:1e10\n-1 1:1e10\n");
        let cfg = SolverConfig {
            lambda: 0.0,
            eta: 1e8,
            ..Default::default()
        };
        let err = train_sgd_generic(&d, &LossFunction::Hinge, &cfg, None).unwrap_err();
        assert!(
            matches!(err, SolverError::Diverged { epoch: 1, step: 1 }),
            "{err}"
        );
    }

    #[test]
    fn asgd_single_step_equals_iterate() {
        let d = one_point("+1 1:0.5 2:1\n");
        let cfg = SolverConfig {
            max_epochs: 1,
            ..Default::default()
        };
        let (avg, _) = train_asgd(&d, &LossFunction::Logistic, &cfg, None).unwrap();
        let (plain, _) = train_sgd_generic(&d, &LossFunction::Logistic, &cfg, None).unwrap();
        assert_eq!(avg.weights, plain.weights);
    }

    #[test]
    fn asgd_averages_a_linear_trajectory() {
        // z stays below 1, so every hinge step adds the same eta * x.
        let d = one_point("+1 1:1e-3\n");
        let cfg = SolverConfig {
            lambda: 0.0,
            eta: 1.0,
            max_epochs: 4,
            bias: BiasMode::None,
            ..Default::default()
        };
        let (avg, _) = train_asgd(&d, &LossFunction::Hinge, &cfg, None).unwrap();
        // iterates 1e-3, 2e-3, 3e-3, 4e-3
        assert!((avg.weights[0] - 2.5e-3).abs() < 1e-15);
    }

    #[test]
    fn option_b_takes_inner_mean() {
        let d = one_point("+1 1:1e-3\n+1 1:1e-3\n");
        let cfg = SolverConfig {
            lambda: 0.0,
            eta: 1.0,
            max_epochs: 1,
            bias: BiasMode::None,
            average: AverageOption::B,
            ..Default::default()
        };
        let (m, _) = train_sgd_generic(&d, &LossFunction::Hinge, &cfg, None).unwrap();
        assert!((m.weights[0] - 1.5e-3).abs() < 1e-15);
    }

    #[test]
    fn trace_has_one_row_per_epoch() {
        let d = synth_gaussian(100, 3, 3.0, 1).unwrap();
        let cfg = SolverConfig {
            max_epochs: 7,
            ..Default::default()
        };
        let (_, tr) =
            train_sgdrl(&d, &LossFunction::default_smooth_ramp(), &cfg, Some(&d)).unwrap();
        let epochs: Vec<usize> = tr.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (1..=7).collect::<Vec<_>>());
        assert!(tr.records.iter().all(|r| r.test_error_pct.is_some()));
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let d = synth_gaussian(200, 4, 2.0, 3).unwrap();
        let cfg = SolverConfig {
            seed: 17,
            ..Default::default()
        };
        let loss = LossFunction::default_reversed_gompertz();
        let a = train_sgdrl(&d, &loss, &cfg, None).unwrap().0;
        let b = train_sgdrl(&d, &loss, &cfg, None).unwrap().0;
        assert_eq!(
            a.weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.weights.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        let c = train_sgdrl(&d, &loss, &SolverConfig { seed: 18, ..cfg }, None)
            .unwrap()
            .0;
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn trained_objective_beats_zero_model() {
        let d = synth_gaussian(400, 5, 3.0, 8).unwrap();
        for loss in [
            LossFunction::default_smooth_ramp(),
            LossFunction::default_reversed_gompertz(),
        ] {
            let cfg = SolverConfig {
                lambda: 1e-3,
                ..Default::default()
            };
            let (m, _) = train_sgdrl(&d, &loss, &cfg, None).unwrap();
            let zero = Model::zeros(d.dimension, loss, cfg);
            assert!(
                primal_objective(&m, &d, &loss, 1e-3).unwrap()
                    <= primal_objective(&zero, &d, &loss, 1e-3).unwrap()
            );
        }
    }

    #[test]
    fn separable_synthetic_is_learned() {
        let train = synth_gaussian(1000, 5, 10.0, 21).unwrap();
        let test = synth_gaussian(1000, 5, 10.0, 22).unwrap();
        let (m, _) =
            train_sgd_generic(&train, &LossFunction::Hinge, &SolverConfig::default(), None)
                .unwrap();
        assert!(test_error_rate(&m, &test).unwrap() < 1.0);
        assert_eq!(test.instances[0].label, Label::Positive);
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0f64..3.0, d)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn closed_form_updates_match_generic_template(
            w0 in vec_strategy(5),
            x in vec_strategy(4),
            pos in any::<bool>(),
            lambda in 0.0f64..1.0,
            eta in 1e-3f64..1.0,
            s_star in -2.5f64..0.5,
            alpha in 0.5f64..5.0,
            beta in -1.0f64..1.0,
            c in 0.2f64..4.0,
            augmented in any::<bool>(),
        ) {
            let x = SparseVector::from_dense(&x);
            let y = if pos { 1.0 } else { -1.0 };
            let bias = if augmented { BiasMode::Augmented } else { BiasMode::None };
            let w0 = if augmented { w0 } else { w0[..4].to_vec() };
            for loss in [
                LossFunction::smooth_ramp(s_star, alpha, beta).unwrap(),
                LossFunction::reversed_gompertz(c).unwrap(),
            ] {
                let mut a = w0.clone();
                let mut b = w0.clone();
                robust_update(&mut a, &x, y, &loss, lambda, eta, bias).unwrap();
                generic_update(&mut b, &x, y, &loss, lambda, eta, bias);
                let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
                for (u, v) in a.iter().zip(&b) {
                    prop_assert!((u - v).abs() / scale < 1e-12, "{loss}: {u} vs {v}");
                }
            }
        }

        #[test]
        fn robust_step_size_is_capped(
            w0 in vec_strategy(4),
            x in vec_strategy(3),
            eta in 1e-3f64..1.0,
            scale in 1.0f64..1e4,
        ) {
            let x = SparseVector::from_dense(&x);
            let w0: Vec<f64> = w0.iter().map(|v| v * scale).collect();
            let x_norm = (x.norm_sq() + 1.0).sqrt();
            for (loss, max_slope) in [
                (LossFunction::default_smooth_ramp(), 2.0 * 2.0 / 4.0),
                (LossFunction::default_reversed_gompertz(), 2.0 * (-1.0f64).exp()),
            ] {
                let mut w = w0.clone();
                robust_update(&mut w, &x, 1.0, &loss, 0.0, eta, BiasMode::Augmented).unwrap();
                let step: f64 = w.iter().zip(&w0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                prop_assert!(step <= eta * max_slope * x_norm * (1.0 + 1e-12));
            }
        }
    }
}
