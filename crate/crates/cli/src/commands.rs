use crate::error::{Failure, EXIT_ASSERTION, EXIT_IO};
use crate::{
    AverageArg, BenchArgs, BiasArg, CheckArgs, CvArgs, FitArgs, FlipArgs, LossCurveArgs,
    SolverArgs, TrainArgs,
};
use robust_sgd::analysis::{
    default_radius, gradient_check, phi_curve, phi_leftward_violations, probe_convexity,
    ConvexityProbeReport, PrimalObjective,
};
use robust_sgd::bench::{cross_validate, run_bench_with_threads, train_method, MethodSettings};
use robust_sgd::data::{
    flip_count, flip_labels, normalize_apply, normalize_fit, read_libsvm_file, write_libsvm_file,
    Dataset, Instance, Label, NormalizationParams, SparseVector,
};
use robust_sgd::loss::{
    default_fit_grid, fit_smooth_ramp, verify_robustness_conditions, ConditionReport,
    ConditionTolerances, LossFunction,
};
use robust_sgd::rng::{derive_seed, SeededRng};
use robust_sgd::solver::{train_sgd_generic, AverageOption, BiasMode, Model, SolverConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};

type CmdResult = Result<(), Failure>;

/// Step for central differences in `check --grad`.
const GRAD_STEP: f64 = 1e-6;
const GRAD_TOLERANCE: f64 = 1e-5;

fn settings(a: &SolverArgs) -> MethodSettings {
    MethodSettings {
        solver: SolverConfig {
            eta: a.eta,
            max_epochs: a.epochs,
            average: match a.average {
                AverageArg::A => AverageOption::A,
                AverageArg::B => AverageOption::B,
            },
            bias: match a.bias {
                BiasArg::Augmented => BiasMode::Augmented,
                BiasArg::None => BiasMode::None,
            },
            ..SolverConfig::default()
        },
        sramp: a.sramp,
        rgomp: a.rgomp,
        ramp: a.ramp,
        pegasos_epoch_cap: a.pegasos_epoch_cap,
    }
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    std::fs::write(path, text)
        .map_err(|e| Failure::io(&format!("cannot write {}", path.display()), e))
}

fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    read_libsvm_file(path).map_err(|e| {
        let f = Failure::from(e);
        Failure::new(f.code, format!("{}: {}", path.display(), f.message))
    })
}

fn normalized(
    train: Dataset,
    test: Option<Dataset>,
    on: bool,
) -> (Dataset, Option<Dataset>, Option<NormalizationParams>) {
    let dim = train
        .dimension
        .max(test.as_ref().map_or(0, |t| t.dimension));
    let train = train.with_dimension(dim);
    let test = test.map(|t| t.with_dimension(dim));
    if !on {
        return (train, test, None);
    }
    let p = normalize_fit(&train);
    let test = test.map(|t| normalize_apply(&t, &p));
    (normalize_apply(&train, &p), test, Some(p))
}

/// Label noise for a command-level seed, on a stream apart from training.
fn with_noise(data: Dataset, noise: f64, seed: u64) -> Result<Dataset, Failure> {
    if noise == 0.0 {
        return Ok(data);
    }
    Ok(flip_labels(&data, noise, derive_seed(seed, &[3]))?)
}

#[derive(Serialize)]
struct ModelFile<'a> {
    method: String,
    model: &'a Model,
    normalization: Option<NormalizationParams>,
    epochs_run: usize,
    final_objective: f64,
}

fn default_trace_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}.trace.csv"))
}

pub fn train(a: TrainArgs) -> CmdResult {
    let s = settings(&a.solver);
    let train = with_noise(load(&a.dataset)?, a.noise, a.seed)?;
    let test = a.test.as_deref().map(load).transpose()?;
    let (train, test, norm) = normalized(train, test, a.normalize);
    let (model, trace) = train_method(a.method, &train, &s, a.lambda, a.seed, test.as_ref())?;
    let last = trace.last().expect("at least one epoch");
    let file = ModelFile {
        method: a.method.to_string(),
        model: &model,
        normalization: norm,
        epochs_run: trace.records.len(),
        final_objective: last.objective,
    };
    write_text(&a.out, &to_json(&file))?;
    let trace_path = a.trace.unwrap_or_else(|| default_trace_path(&a.out));
    write_text(&trace_path, &trace.to_csv())?;
    let test_part = last
        .test_error_pct
        .map(|e| format!(" test_err_pct={e}"))
        .unwrap_or_default();
    println!(
        "method={} lambda={} epochs={} objective={} train_err_pct={}{test_part}",
        a.method, a.lambda, file.epochs_run, last.objective, last.train_error_pct
    );
    Ok(())
}

pub fn cv(a: CvArgs) -> CmdResult {
    if a.folds < 2 {
        return Err(Failure::usage("--folds must be at least 2"));
    }
    let s = settings(&a.solver);
    let data = with_noise(load(&a.dataset)?, a.noise, a.seed)?;
    let (data, _, _) = normalized(data, None, a.normalize);
    let report = cross_validate(a.method, &data, &s, &a.lambdas, a.folds, a.seed)?;
    let mut csv = String::from("lambda,mean_err_pct,diverged_folds");
    for f in 1..=a.folds {
        csv.push_str(&format!(",fold{f}_err_pct"));
    }
    csv.push('\n');
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{}",
            r.lambda, r.mean_error_pct, r.diverged_folds
        ));
        for e in &r.fold_errors_pct {
            csv.push_str(&format!(",{e}"));
        }
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)?;
    eprintln!("selected_lambda={}", report.selected_lambda);
    Ok(())
}

pub fn flip(a: FlipArgs) -> CmdResult {
    let data = load(&a.dataset)?;
    let flipped = flip_labels(&data, a.noise, a.seed)?;
    write_libsvm_file(&flipped, &a.out)?;
    println!(
        "flipped {} of {} labels",
        flip_count(data.len(), a.noise),
        data.len()
    );
    Ok(())
}

pub fn bench(a: BenchArgs) -> CmdResult {
    let spec = robust_sgd::bench::ExperimentSpec::load(&a.spec)?;
    let threads = a.threads.or_else(robust_sgd::bench::threads_from_env);
    let report = run_bench_with_threads(&spec, threads)?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Failure::io(&format!("cannot create {}", a.out.display()), e))?;
    let csv = report.results_csv();
    write_text(&a.out.join("results.csv"), &csv)?;
    write_text(&a.out.join("report.json"), &to_json(&report))?;
    print!("{csv}");
    let failed: Vec<String> = report
        .failed_cells()
        .map(|c| {
            format!(
                "{} at noise {}: {}",
                c.method,
                c.noise_fraction,
                c.error.as_deref().unwrap_or("")
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_IO,
            format!("{} cell(s) failed: {}", failed.len(), failed.join("; ")),
        ))
    }
}

#[derive(Serialize)]
struct GradientEntry {
    loss: String,
    configurations: usize,
    max_rel_err: Option<f64>,
    note: Option<String>,
}

#[derive(Serialize)]
struct PhiEntry {
    loss: String,
    points: usize,
    violations: Option<usize>,
    note: Option<String>,
}

#[derive(Serialize)]
struct ProbeEntry {
    loss: String,
    lambda: f64,
    report: ConvexityProbeReport,
}

#[derive(Serialize)]
struct CheckReport {
    conditions: Vec<ConditionReport>,
    gradient: Vec<GradientEntry>,
    phi: Vec<PhiEntry>,
    probe: Vec<ProbeEntry>,
    failures: Vec<String>,
}

fn random_instance(rng: &mut SeededRng, bias: BiasMode) -> (Instance, Vec<f64>) {
    let d = 1 + rng.below(8) as usize;
    let x: Vec<f64> = (0..d).map(|_| rng.next_normal()).collect();
    let label = if rng.below(2) == 0 {
        Label::Positive
    } else {
        Label::Negative
    };
    let len = d + usize::from(bias == BiasMode::Augmented);
    let w = (0..len).map(|_| 0.7 * rng.next_normal()).collect();
    (
        Instance {
            features: SparseVector::from_dense(&x),
            label,
        },
        w,
    )
}

fn worst_gradient_error(loss: &LossFunction, samples: usize, seed: u64) -> Result<f64, Failure> {
    let mut rng = SeededRng::new(seed);
    let mut worst = 0.0f64;
    for i in 0..samples {
        let bias = if i % 2 == 0 {
            BiasMode::Augmented
        } else {
            BiasMode::None
        };
        let (inst, w) = random_instance(&mut rng, bias);
        let lambda = 10f64.powf(-4.0 + 4.0 * rng.next_f64());
        worst = worst.max(gradient_check(loss, lambda, &w, &inst, bias, GRAD_STEP)?);
    }
    Ok(worst)
}

pub fn check(a: CheckArgs) -> CmdResult {
    let grid = ConditionTolerances::default_grid();
    let tol = ConditionTolerances::default();
    let mut report = CheckReport {
        conditions: Vec::new(),
        gradient: Vec::new(),
        phi: Vec::new(),
        probe: Vec::new(),
        failures: Vec::new(),
    };
    let probe_data = a.probe.as_deref().map(load).transpose()?;
    for loss in &a.losses {
        let name = loss.to_string();
        let cond = verify_robustness_conditions(loss, &grid, &tol);
        if a.require_robust && !cond.is_robust() {
            report.failures.push(format!(
                "{name}: not robust ({})",
                cond.failures().join(", ")
            ));
        }
        report.conditions.push(cond);

        if a.grad {
            let entry = if loss.is_smooth() {
                let worst = worst_gradient_error(loss, a.samples, a.seed)?;
                if !(worst < GRAD_TOLERANCE) {
                    report.failures.push(format!(
                        "{name}: gradient max_rel_err {worst:e} >= {GRAD_TOLERANCE:e}"
                    ));
                }
                GradientEntry {
                    loss: name.clone(),
                    configurations: a.samples,
                    max_rel_err: Some(worst),
                    note: None,
                }
            } else {
                GradientEntry {
                    loss: name.clone(),
                    configurations: 0,
                    max_rel_err: None,
                    note: Some("not differentiable everywhere".into()),
                }
            };
            report.gradient.push(entry);
        }

        if a.phi {
            let entry = if loss.is_robust() {
                let curve = phi_curve(loss, -20.0, 0.0, 1000)?;
                let v = phi_leftward_violations(&curve);
                if !v.is_empty() {
                    report.failures.push(format!(
                        "{name}: weighted parameter grows for deeper outliers at z={}",
                        v[0]
                    ));
                }
                PhiEntry {
                    loss: name.clone(),
                    points: curve.len(),
                    violations: Some(v.len()),
                    note: None,
                }
            } else {
                PhiEntry {
                    loss: name.clone(),
                    points: 0,
                    violations: None,
                    note: Some("defined for robust losses only".into()),
                }
            };
            report.phi.push(entry);
        }

        if let Some(data) = &probe_data {
            if !loss.is_smooth() {
                report
                    .failures
                    .push(format!("{name}: probes need a differentiable loss"));
                continue;
            }
            let config = SolverConfig {
                lambda: a.lambda,
                seed: a.seed,
                ..SolverConfig::default()
            };
            let (model, _) = train_sgd_generic(data, loss, &config, None)?;
            let objective = PrimalObjective {
                data,
                loss: *loss,
                lambda: a.lambda,
                bias: model.bias_mode,
            };
            let radius = default_radius(&model.weights);
            let r = probe_convexity(&objective, &model.weights, radius, a.samples, a.seed)?;
            if r.alpha_hat > r.beta_hat {
                report.failures.push(format!(
                    "{name}: alpha_hat {} exceeds beta_hat {}",
                    r.alpha_hat, r.beta_hat
                ));
            }
            report.probe.push(ProbeEntry {
                loss: name,
                lambda: a.lambda,
                report: r,
            });
        }
    }
    emit(a.out.as_deref(), &to_json(&report))?;
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_ASSERTION,
            format!("failed checks: {}", report.failures.join("; ")),
        ))
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn losscurve(a: LossCurveArgs) -> CmdResult {
    let ok_range = a.z_min.is_finite()
        && a.z_max.is_finite()
        && match a.n {
            0 => false,
            1 => a.z_min == a.z_max,
            _ => a.z_min < a.z_max,
        };
    if !ok_range {
        return Err(Failure::usage(format!(
            "need finite z-min < z-max with n >= 2, or z-min = z-max with n = 1 (got [{}, {}], n = {})",
            a.z_min, a.z_max, a.n
        )));
    }
    let mut csv = String::from("z");
    for l in &a.losses {
        for col in ["value", "derivative", "phi"] {
            csv.push(',');
            csv.push_str(&csv_quote(&format!("{l} {col}")));
        }
    }
    csv.push('\n');
    for i in 0..a.n {
        let z = if a.n == 1 || i + 1 == a.n {
            a.z_max
        } else {
            a.z_min + (a.z_max - a.z_min) * i as f64 / (a.n - 1) as f64
        };
        csv.push_str(&z.to_string());
        for l in &a.losses {
            let phi = l.phi(z).map(|p| p.to_string()).unwrap_or_default();
            csv.push_str(&format!(",{},{},{phi}", l.value(z), l.derivative(z)));
        }
        csv.push('\n');
    }
    emit(a.out.as_deref(), &csv)
}

#[derive(Serialize)]
struct FitOutput {
    s_star: f64,
    alpha: f64,
    beta: f64,
    sse: f64,
    loss: String,
}

pub fn fit_sramp(a: FitArgs) -> CmdResult {
    let grid = match a.grid_min {
        None if a.grid_max == 3.0 && a.n == 1001 => default_fit_grid(a.s_star),
        lo => {
            let lo = lo.unwrap_or(a.s_star - 2.0);
            if a.n < 2 || !(lo < a.grid_max) {
                return Err(Failure::usage("need grid-min < grid-max and n >= 2"));
            }
            (0..a.n)
                .map(|i| lo + (a.grid_max - lo) * i as f64 / (a.n - 1) as f64)
                .collect()
        }
    };
    let fit = fit_smooth_ramp(a.s_star, &grid)?;
    let loss = LossFunction::smooth_ramp(fit.s_star, fit.alpha, fit.beta)?;
    print!(
        "{}",
        to_json(&FitOutput {
            s_star: fit.s_star,
            alpha: fit.alpha,
            beta: fit.beta,
            sse: fit.sse,
            loss: loss.to_string()
        })
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_path_sits_next_to_model() {
        assert_eq!(
            default_trace_path(Path::new("out/m.json")),
            PathBuf::from("out/m.trace.csv")
        );
        assert_eq!(
            default_trace_path(Path::new("m")),
            PathBuf::from("m.trace.csv")
        );
    }

    #[test]
    fn quoting_only_when_needed() {
        assert_eq!(csv_quote("hinge value"), "hinge value");
        assert_eq!(csv_quote("sramp:s=-1,a=2 phi"), "\"sramp:s=-1,a=2 phi\"");
    }

    #[test]
    fn robust_losses_pass_gradient_sampling() {
        for l in [
            LossFunction::default_smooth_ramp(),
            LossFunction::default_reversed_gompertz(),
            LossFunction::Logistic,
        ] {
            assert!(worst_gradient_error(&l, 50, 1).unwrap() < GRAD_TOLERANCE);
        }
    }
}
