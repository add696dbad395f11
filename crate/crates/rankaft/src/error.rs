use std::fmt;

/// A rejected input row, with its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: {} row(s) rejected\n{}", rejected.len(), format_rows(rejected))]
    CsvRows { path: String, rejected: Vec<RowError> },

    #[error("config error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("estimating function identically zero: {0}")]
    DegenerateData(String),

    #[error("unidentified direction: the weighted design is rank-deficient along {0:?}")]
    RankDeficient(Vec<f64>),

    #[error("calibration failure: {0}")]
    Calibration(String),

    #[error("covariance unavailable: {0}")]
    Covariance(String),

    #[error("{failed} of {total} replicates failed (more than 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for usage/schema problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Schema(_) | Error::CsvRows { .. } | Error::Config(_) => 2,
            _ => 1,
        }
    }

    /// Short machine-readable kind tag used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidObservation(_) => "observation",
            Error::InvalidDataset(_) => "dataset",
            Error::Schema(_) => "schema",
            Error::CsvRows { .. } => "schema",
            Error::Config(_) => "config",
            Error::InvalidInput(_) => "input",
            Error::DegenerateData(_) => "degenerate",
            Error::RankDeficient(_) => "rank",
            Error::Calibration(_) => "calibration",
            Error::Covariance(_) => "covariance",
            Error::TooManyFailures { .. } => "replicates",
            Error::Io(_) => "io",
        }
    }
}

fn format_rows(rows: &[RowError]) -> String {
    const SHOWN: usize = 10;
    let mut out = rows
        .iter()
        .take(SHOWN)
        .map(|r| format!("  {r}"))
        .collect::<Vec<_>>()
        .join("\n");
    if rows.len() > SHOWN {
        out.push_str(&format!("\n  ... and {} more", rows.len() - SHOWN));
    }
    out
}
