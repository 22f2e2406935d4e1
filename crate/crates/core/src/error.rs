use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("csv has no header row")]
    MissingHeader,
    #[error("duplicate column {0:?} in header")]
    DuplicateColumn(String),
    #[error("column not found: {0:?}")]
    ColumnNotFound(String),
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table has no rows")]
    EmptyTable,
    #[error("target column {0:?} cannot also be protected")]
    TargetIsProtected(String),
    #[error("column {column:?}: {reason}")]
    Binning { column: String, reason: String },
    #[error("column {column:?}: value {value:?} is reserved for missing cells")]
    ReservedLabel { column: String, value: String },
    #[error("column {column:?}, row {row}: unseen category {value:?}")]
    UnseenCategory {
        column: String,
        row: usize,
        value: String,
    },
    #[error("row {row}: target value {value:?} is not one of 0/1/true/false/yes/no")]
    InvalidTarget { row: usize, value: String },
    #[error("target has {found} values for {rows} rows")]
    TargetLength { rows: usize, found: usize },
    #[error("degenerate target: no rows with target = {0}")]
    DegenerateTarget(u8),
    #[error("table has no target")]
    NoTarget,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("column sets differ: {0}")]
    ColumnMismatch(String),
    #[error("rule: {0}")]
    Rule(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("feature {feature:?} has no category {value:?}")]
    UnknownCategory { feature: String, value: String },
    #[error("subgroup has no members")]
    EmptySubgroup,
    #[error("lattice too large for brute force: {0} rules")]
    LatticeTooLarge(u128),
    #[error("max_literals {requested} exceeds number of features {features}")]
    MaxLiterals { requested: usize, features: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing {0}")]
    MissingArgument(&'static str),
    #[error("histogram supports differ ({0} vs {1} bins)")]
    SupportMismatch(usize, usize),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AuditError {
    /// True for errors caused by how the caller combined arguments rather
    /// than by the data itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            AuditError::MissingArgument(_)
                | AuditError::InvalidParameter(_)
                | AuditError::MaxLiterals { .. }
        )
    }
}
