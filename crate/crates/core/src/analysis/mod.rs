//! Empirical checks of the quantities the convergence analysis relies on.

mod curves;
mod probe;
mod rate;

pub use curves::{
    gradient_check, instance_gradient, instance_value, phi_closed_form, phi_curve,
    phi_leftward_violations, run_variance,
};
pub use probe::{
    default_radius, probe_arsc, probe_arsm, probe_convexity, ConvexityProbeReport, ObjectiveFamily,
    PrimalObjective, SmoothObjective,
};
pub use rate::{estimate_rate, log_log_slope, RateReport, GAP_FLOOR};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{0} loss is not differentiable everywhere")]
    NotSmooth(&'static str),
    #[error(transparent)]
    Loss(#[from] crate::loss::LossError),
}
