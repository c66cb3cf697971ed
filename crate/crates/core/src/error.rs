use alloc::string::String;
use core::fmt;

/// Every failure the core library reports.
///
/// The variants follow the error classes used throughout: shape and mode
/// mismatches, out-of-range indices, data outside a loss's domain, model
/// values below a loss's feasible bound, and numerical breakdown in the
/// optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    Shape(String),
    Mode { mode: usize, order: usize },
    Range(String),
    Capacity { requested: usize, budget: usize },
    Domain(String),
    Feasibility(String),
    Contract(&'static str),
    Numerical(String),
}

impl Error {
    /// Process exit code class: 2 for numerical breakdown, 1 for everything else.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shape(msg) => write!(f, "shape error: {msg}"),
            Self::Mode { mode, order } => {
                write!(
                    f,
                    "mode error: mode {mode} is invalid for an order-{order} tensor"
                )
            }
            Self::Range(msg) => write!(f, "range error: {msg}"),
            Self::Capacity { requested, budget } => write!(
                f,
                "capacity error: {requested} dense entries requested, budget is {budget}"
            ),
            Self::Domain(msg) => write!(f, "domain error: {msg}"),
            Self::Feasibility(msg) => write!(f, "feasibility error: {msg}"),
            Self::Contract(msg) => write!(f, "contract error: {msg}"),
            Self::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
