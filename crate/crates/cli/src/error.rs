use robust_sgd::analysis::AnalysisError;
use robust_sgd::bench::BenchError;
use robust_sgd::data::DataError;
use robust_sgd::loss::LossError;
use robust_sgd::solver::SolverError;
use std::fmt;

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_DIVERGED: u8 = 4;
pub const EXIT_ASSERTION: u8 = 5;

/// A message plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    pub fn io(context: &str, e: impl fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{context}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        let code = match e {
            DataError::Parse { .. } | DataError::InvalidVector(_) => EXIT_PARSE,
            DataError::InvalidArgument(_) => EXIT_USAGE,
            DataError::Io(_) => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let code = match e {
            SolverError::Diverged { .. } => EXIT_DIVERGED,
            SolverError::EmptyDataset => EXIT_PARSE,
            _ => EXIT_USAGE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<LossError> for Failure {
    fn from(e: LossError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        Self::usage(e.to_string())
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Data(d) => d.into(),
            BenchError::Solver(s) => s.into(),
            BenchError::Io(io) => Self::io("cannot read experiment file", io),
            BenchError::InvalidSpec(m) => Self::new(EXIT_PARSE, format!("invalid experiment: {m}")),
        }
    }
}
