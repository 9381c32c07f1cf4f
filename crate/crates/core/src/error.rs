use std::path::PathBuf;

/// Boxed error used by user-supplied callbacks (workloads, pipeline stages).
pub type BoxError = Box<dyn std::error::Error + Send + Sync + 'static>;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("output directory {0} exists and is not empty (pass overwrite to replace it)")]
    OutputExists(PathBuf),

    #[error("store corrupted: {0}")]
    Corruption(String),

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("unknown metadata column `{0}`")]
    UnknownColumn(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("duplicate sample key `{0}`")]
    DuplicateKey(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("need at least {needed} usable profile records, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate fit: rank-deficient design, collinear columns: {}", .columns.join(", "))]
    DegenerateFit { columns: Vec<String> },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("archive format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("stage {stage} failed on sample `{key}`: {source}")]
    Stage {
        stage: usize,
        key: String,
        #[source]
        source: BoxError,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for command-line front ends: 2 for validation
    /// problems with the caller's input, 3 for I/O and on-disk corruption.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Corruption(_)
            | Error::UnsupportedVersion { .. }
            | Error::Format { .. }
            | Error::Json { .. }
            | Error::Csv { .. } => 3,
            Error::Stage { .. } => 3,
            _ => 2,
        }
    }
}
