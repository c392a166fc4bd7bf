mod commands;
mod error;

use clap::{Args, Parser, Subcommand, ValueEnum};
use robust_sgd::bench::Method;
use robust_sgd::loss::LossFunction;
use std::path::PathBuf;
use std::process::ExitCode;

/// Linear classifiers trained by SGD with robust losses.
#[derive(Parser)]
#[command(name = "robust-sgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model; writes model JSON and a per-epoch trace CSV.
    Train(TrainArgs),
    /// Cross-validate lambda over a grid.
    Cv(CvArgs),
    /// Flip a fraction of labels and write the result.
    Flip(FlipArgs),
    /// Run an experiment file; writes results.csv and report.json.
    Bench(BenchArgs),
    /// Loss diagnostics as one JSON document.
    Check(CheckArgs),
    /// Tabulate loss value, derivative and weighted parameter.
    Losscurve(LossCurveArgs),
    /// Fit smooth-ramp parameters to the ramp loss.
    FitSramp(FitArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum AverageArg {
    A,
    B,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    Augmented,
    None,
}

#[derive(Args)]
struct SolverArgs {
    /// Constant learning rate.
    #[arg(long, default_value_t = 0.1)]
    eta: f64,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    /// Epoch output: last iterate (a) or within-epoch mean (b).
    #[arg(long, value_enum, default_value = "a")]
    average: AverageArg,
    #[arg(long, value_enum, default_value = "augmented")]
    bias: BiasArg,
    #[arg(long, default_value = "sramp:s=-1,a=2,b=-0.03")]
    sramp: LossFunction,
    #[arg(long, default_value = "rgomp:c=2")]
    rgomp: LossFunction,
    #[arg(long, default_value = "ramp:s=-1")]
    ramp: LossFunction,
    /// Upper limit on Pegasos epochs (nominally 10 / lambda).
    #[arg(long, default_value_t = 50)]
    pegasos_epoch_cap: usize,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct TrainArgs {
    /// Training set in LIBSVM format.
    #[arg(long)]
    dataset: PathBuf,
    /// Optional test set, evaluated after every epoch.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    method: Method,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of training labels to flip before training.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Scale features to [0, 1] with training-set statistics.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Model JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Trace CSV path; defaults to the model path with `.trace.csv`.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CvArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    method: Method,
    /// Comma-separated lambda grid.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1e-6,1e-5,1e-4,1e-3,1e-2,1e-1,1,10"
    )]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fraction of labels to flip before cross-validation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    solver: SolverArgs,
    /// Fold-error CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlipArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment file (TOML, or JSON with a `.json` extension).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads; overrides ROBUST_SGD_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct CheckArgs {
    /// Loss spec, repeatable: hinge, log, ramp:s=, sramp:s=,a=,b=, rgomp:c=.
    #[arg(long = "loss", default_values = ["sramp:s=-1,a=2,b=-0.03", "rgomp:c=2"])]
    losses: Vec<LossFunction>,
    /// Fail unless every loss passes all robustness conditions.
    #[arg(long)]
    require_robust: bool,
    /// Compare analytic gradients with central differences.
    #[arg(long)]
    grad: bool,
    /// Check that the weighted parameter shrinks for deeper misclassification.
    #[arg(long)]
    phi: bool,
    /// Probe convexity and smoothness moduli around a model trained on this set.
    #[arg(long)]
    probe: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    /// Random configurations for --grad, sampled pairs for --probe.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct LossCurveArgs {
    /// Loss spec, repeatable.
    #[arg(long = "loss", default_values = ["ramp:s=-1", "sramp:s=-1,a=2,b=-0.03"])]
    losses: Vec<LossFunction>,
    #[arg(long, default_value_t = -5.0)]
    z_min: f64,
    #[arg(long, default_value_t = 5.0)]
    z_max: f64,
    /// Grid points; 1 needs z-min = z-max.
    #[arg(long, default_value_t = 101)]
    n: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    #[arg(long)]
    s_star: f64,
    /// Probe grid start; defaults to s* - 2.
    #[arg(long)]
    grid_min: Option<f64>,
    #[arg(long, default_value_t = 3.0)]
    grid_max: f64,
    #[arg(long, default_value_t = 1001)]
    n: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Cv(a) => commands::cv(a),
        Command::Flip(a) => commands::flip(a),
        Command::Bench(a) => commands::bench(a),
        Command::Check(a) => commands::check(a),
        Command::Losscurve(a) => commands::losscurve(a),
        Command::FitSramp(a) => commands::fit_sramp(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
