use std::path::PathBuf;

use thiserror::Error;

/// A single configuration problem, tagged with the dotted path of the field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("degenerate column{}: h = {h:e} m", cell.map(|c| format!(" in cell {c}")).unwrap_or_default())]
    DegenerateColumn { cell: Option<usize>, h: f64 },

    #[error("negative water concentration s_w = {0:e}")]
    NegativeWater(f64),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("non-positive wave-speed estimate Psi = {0:e}")]
    NonpositivePsi(f64),

    #[error("tridiagonal solve failed: zero pivot at row {0}")]
    SingularSystem(usize),

    #[error("non-finite value after step {step}: {what}")]
    BlowUp { step: u64, what: String },

    #[error("negative {what} = {value:e} in cell {cell}, layer {layer}")]
    NegativeConcentration {
        what: &'static str,
        cell: usize,
        layer: usize,
        value: f64,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("states do not share a grid: {0}")]
    MismatchedStates(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("syntax error on line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("invalid configuration:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed snapshot: {message}")]
    Snapshot { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for problems with the user's input rather than with the run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Syntax { .. } | Error::Validation(_) | Error::UnknownPreset(_)
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
