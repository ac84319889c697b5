use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VenomError>;

/// Every failure the pipeline can report.
///
/// Variants are grouped by the exit-status class they map to in the CLI; see
/// [`VenomError::exit_code`].
#[derive(Debug, Error)]
pub enum VenomError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("evaluation produced a non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dataset has {cols} columns but the model accepts at most {max}")]
    UnsupportedWidth { cols: usize, max: usize },

    #[error("{path}: file is empty")]
    EmptyFile { path: String },

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    RaggedRow {
        path: String,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: column {column:?} has unparseable number {value:?}")]
    UnparseableNumber {
        path: String,
        line: usize,
        column: String,
        value: String,
    },

    #[error("{path}:{line}: column {column:?} is missing a value")]
    MissingValue {
        path: String,
        line: usize,
        column: String,
    },

    #[error("{path}: category {value:?} of column {column:?} is not in the lake vocabulary")]
    UnknownCategory {
        path: String,
        column: String,
        value: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("embedding store version {store} does not match model version {model}")]
    StaleStore { store: String, model: String },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("dataset {dataset} is unusable: {reason}")]
    Unusable { dataset: String, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("linear system is singular")]
    Singular,

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<VenomError>,
    },

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl VenomError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VenomError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(what: &'static str, detail: impl Into<String>) -> Self {
        VenomError::Parse {
            what,
            detail: detail.into(),
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        VenomError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit status: 2 configuration, 3 data, 4 divergence, 5 internal.
    pub fn exit_code(&self) -> i32 {
        use VenomError::*;
        match self {
            Config(_) | StaleStore { .. } => 2,
            Diverged { .. } => 4,
            Internal(_) => 5,
            Stage { source, .. } => source.exit_code(),
            Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
            _ => 3,
        }
    }

    /// Short machine-readable tag for diagnostics.
    pub fn kind(&self) -> &'static str {
        use VenomError::*;
        match self {
            Dimension { .. } => "dimension",
            Config(_) => "config",
            Contract(_) => "contract",
            NonFinite(_) => "non_finite",
            EmptyInput(_) => "empty_input",
            UnsupportedWidth { .. } => "unsupported_width",
            EmptyFile { .. } => "empty_file",
            RaggedRow { .. } => "ragged_row",
            UnparseableNumber { .. } => "unparseable_number",
            MissingValue { .. } => "missing_value",
            UnknownCategory { .. } => "unknown_category",
            Schema(_) => "schema",
            Parse { .. } => "parse",
            StaleStore { .. } => "stale_store",
            Diverged { .. } => "diverged",
            Unusable { .. } => "unusable",
            InsufficientData(_) => "insufficient_data",
            Singular => "singular",
            DegenerateVector(_) => "degenerate_vector",
            Io { .. } => "io",
            Stage { source, .. } => source.kind(),
            Internal(_) => "internal",
        }
    }
}
