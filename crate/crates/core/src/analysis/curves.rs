use super::AnalysisError;
use crate::data::Instance;
use crate::loss::LossFunction;
use crate::solver::BiasMode;

/// `(z, phi(z))` on `n` evenly spaced points of `[z_min, z_max]`.
pub fn phi_curve(
    loss: &LossFunction,
    z_min: f64,
    z_max: f64,
    n: usize,
) -> Result<Vec<(f64, f64)>, AnalysisError> {
    if !(z_max < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "phi is undefined at z >= 1, got z_max = {z_max}"
        )));
    }
    if !(z_min < z_max) || n < 2 || !z_min.is_finite() {
        return Err(AnalysisError::InvalidArgument(format!(
            "need finite z_min < z_max and n >= 2, got [{z_min}, {z_max}], n = {n}"
        )));
    }
    let step = (z_max - z_min) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            let z = if i + 1 == n {
                z_max
            } else {
                z_min + step * i as f64
            };
            Ok((z, loss.phi(z)?))
        })
        .collect()
}

/// The weighted parameter written out directly: for the smooth ramp
/// `(1 - s) a d e^{a z} / ((1 - z)(1 + d e^{a z})^2)` with `d = e^{a b}`, and
/// for the reversed Gompertz loss `c e^{c z - e^{c z}} / (1 - z)`.
pub fn phi_closed_form(loss: &LossFunction, z: f64) -> Result<f64, AnalysisError> {
    if z >= 1.0 {
        return Err(AnalysisError::InvalidArgument(format!(
            "phi is undefined at z >= 1, got {z}"
        )));
    }
    match *loss {
        LossFunction::SmoothRamp {
            s_star,
            alpha,
            beta,
        } => {
            let delta = (alpha * beta).exp();
            let e = (alpha * z).exp();
            Ok((1.0 - s_star) * alpha * delta * e / ((1.0 - z) * (1.0 + delta * e).powi(2)))
        }
        LossFunction::ReversedGompertz { c } => Ok(c * (c * z - (c * z).exp()).exp() / (1.0 - z)),
        _ => Err(AnalysisError::NotSmooth(loss.name())),
    }
}

/// Points on `z <= 0` where `phi` does not strictly shrink when stepping to
/// the next smaller `z`. Expects `curve` sorted by increasing `z`.
pub fn phi_leftward_violations(curve: &[(f64, f64)]) -> Vec<f64> {
    curve
        .windows(2)
        .filter(|w| w[1].0 <= 0.0 && !(w[0].1 < w[1].1))
        .map(|w| w[0].0)
        .collect()
}

/// Largest relative error between the analytic gradient of
/// `g(w) = (lambda / 2) ||w||^2 + r(y (<w, x> + b))` and its central
/// differences with step `h`, each normalized by `max(1, |analytic|)`.
pub fn gradient_check(
    loss: &LossFunction,
    lambda: f64,
    w: &[f64],
    instance: &Instance,
    bias: BiasMode,
    h: f64,
) -> Result<f64, AnalysisError> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!(
            "step must be positive, got {h}"
        )));
    }
    if !loss.is_smooth() {
        return Err(AnalysisError::NotSmooth(loss.name()));
    }
    let analytic = instance_gradient(loss, lambda, w, instance, bias);
    let mut worst = 0.0f64;
    let mut probe = w.to_vec();
    for k in 0..w.len() {
        probe[k] = w[k] + h;
        let up = instance_value(loss, lambda, &probe, instance, bias);
        probe[k] = w[k] - h;
        let dn = instance_value(loss, lambda, &probe, instance, bias);
        probe[k] = w[k];
        let fd = (up - dn) / (2.0 * h);
        worst = worst.max((analytic[k] - fd).abs() / analytic[k].abs().max(1.0));
    }
    Ok(worst)
}

fn margin(w: &[f64], instance: &Instance, bias: BiasMode) -> f64 {
    let (feat, b) = match bias {
        BiasMode::Augmented => (&w[..w.len() - 1], w[w.len() - 1]),
        BiasMode::None => (w, 0.0),
    };
    instance.label.as_f64() * (instance.features.dot(feat) + b)
}

pub fn instance_value(
    loss: &LossFunction,
    lambda: f64,
    w: &[f64],
    instance: &Instance,
    bias: BiasMode,
) -> f64 {
    0.5 * lambda * w.iter().map(|v| v * v).sum::<f64>() + loss.value(margin(w, instance, bias))
}

pub fn instance_gradient(
    loss: &LossFunction,
    lambda: f64,
    w: &[f64],
    instance: &Instance,
    bias: BiasMode,
) -> Vec<f64> {
    let c = loss.derivative(margin(w, instance, bias)) * instance.label.as_f64();
    let mut g: Vec<f64> = w.iter().map(|v| lambda * v).collect();
    let feat_len = g.len() - usize::from(bias == BiasMode::Augmented);
    for (k, v) in instance.features.entries() {
        let k = k as usize - 1;
        if k < feat_len {
            g[k] += c * v;
        }
    }
    if bias == BiasMode::Augmented {
        g[feat_len] += c;
    }
    g
}

/// Unbiased sample variance.
pub fn run_variance(values: &[f64]) -> Result<f64, AnalysisError> {
    if values.len() < 2 {
        return Err(AnalysisError::InvalidArgument(format!(
            "variance needs at least two values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Label, SparseVector};
    use proptest::prelude::*;

    fn inst(pairs: Vec<(u32, f64)>, label: Label) -> Instance {
        Instance {
            features: SparseVector::from_pairs(pairs).unwrap(),
            label,
        }
    }

    #[test]
    fn variance_of_two_points() {
        assert_eq!(run_variance(&[4.0, 6.0]).unwrap(), 2.0);
        assert_eq!(run_variance(&[3.0; 5]).unwrap(), 0.0);
        assert!(run_variance(&[1.0]).is_err());
    }

    #[test]
    fn robust_phi_shrinks_for_outliers() {
        for loss in [
            LossFunction::default_smooth_ramp(),
            LossFunction::default_reversed_gompertz(),
        ] {
            let c = phi_curve(&loss, -20.0, 0.0, 1000).unwrap();
            assert_eq!(c.len(), 1000);
            assert_eq!(c.last().unwrap().0, 0.0);
            assert!(c.iter().all(|&(_, p)| p > 0.0));
            assert!(phi_leftward_violations(&c).is_empty(), "{loss}");
        }
        let rg = LossFunction::default_reversed_gompertz();
        assert!(rg.phi(-10.0).unwrap() < 1e-3 * rg.phi(0.0).unwrap());
    }

    #[test]
    fn closed_form_matches_derivative_ratio() {
        for loss in [
            LossFunction::default_smooth_ramp(),
            LossFunction::smooth_ramp(-0.7, 3.0, -0.15).unwrap(),
            LossFunction::default_reversed_gompertz(),
            LossFunction::reversed_gompertz(0.5).unwrap(),
        ] {
            for z in [-10.0, -3.0, -0.5, 0.0, 0.3, 0.99] {
                let a = phi_closed_form(&loss, z).unwrap();
                let b = loss.phi(z).unwrap();
                assert!((a - b).abs() <= 1e-10 * b.abs(), "{loss} z={z}: {a} vs {b}");
            }
        }
        assert!(phi_closed_form(&LossFunction::Hinge, 0.0).is_err());
        assert!(phi_closed_form(&LossFunction::default_reversed_gompertz(), 1.0).is_err());
    }

    #[test]
    fn leftward_check_flags_a_bump() {
        let c = [
            (-2.0, 0.1),
            (-1.0, 0.3),
            (-0.5, 0.2),
            (0.0, 0.4),
            (0.5, 0.1),
        ];
        assert_eq!(phi_leftward_violations(&c), vec![-1.0]);
    }

    #[test]
    fn phi_curve_rejects_z_at_or_above_one() {
        let l = LossFunction::Logistic;
        assert!(phi_curve(&l, -1.0, 1.0, 10).is_err());
        assert!(phi_curve(&l, 0.5, 0.2, 10).is_err());
        assert!(phi_curve(&l, -1.0, 0.5, 1).is_err());
    }

    #[test]
    fn gradient_check_rejects_kinked_losses_and_bad_steps() {
        let x = inst(vec![(1, 1.0)], Label::Positive);
        let w = [0.1, 0.0];
        assert!(
            gradient_check(&LossFunction::Hinge, 0.1, &w, &x, BiasMode::Augmented, 1e-5).is_err()
        );
        let l = LossFunction::Logistic;
        assert!(gradient_check(&l, 0.1, &w, &x, BiasMode::Augmented, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn smooth_losses_pass_gradient_check(
            w in proptest::collection::vec(-2.0f64..2.0, 4),
            x in proptest::collection::vec(-1.5f64..1.5, 3),
            positive in any::<bool>(),
            lambda in 0.0f64..1.0,
        ) {
            let label = if positive { Label::Positive } else { Label::Negative };
            let instance = Instance { features: SparseVector::from_dense(&x), label };
            for loss in [LossFunction::Logistic, LossFunction::default_smooth_ramp(), LossFunction::default_reversed_gompertz()] {
                let e = gradient_check(&loss, lambda, &w, &instance, BiasMode::Augmented, 1e-5).unwrap();
                prop_assert!(e < 1e-6, "{loss}: {e}");
            }
        }
    }
}
