use thiserror::Error;

/// Crate-wide error type.
///
/// Variants are grouped by the surface that raises them: ingestion,
/// instance validation, solver refusals, and file I/O. The CLI maps
/// these onto exit codes, so parse-type and validation-type failures
/// are kept distinct.
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample {sample_id}: label {label} out of range for label_count {label_count}")]
    LabelOutOfRange {
        sample_id: String,
        label: u32,
        label_count: u32,
    },

    #[error("sample {sample_id}: expected {expected} outputs, found {found}")]
    ArityMismatch {
        sample_id: String,
        expected: usize,
        found: usize,
    },

    #[error("tables disagree on shape: arity {arity_a}x{arity_b}, label_count {labels_a}x{labels_b}")]
    TableShapeMismatch {
        arity_a: usize,
        arity_b: usize,
        labels_a: u32,
        labels_b: u32,
    },

    #[error("total {total} does not equal class_count {class_count} * class_size {class_size}")]
    SizeMismatch {
        total: u64,
        class_count: u32,
        class_size: u64,
    },

    #[error("operation requires arity 2, table has arity {arity}")]
    ArityNotTwo { arity: usize },

    #[error("row marginal violated for class {class}: sum {found}, expected {expected}")]
    RowMarginal { class: u32, found: u64, expected: u64 },

    #[error("column marginal violated for cell {cell}: sum {found}, expected {expected}")]
    ColumnMarginal { cell: usize, found: u64, expected: u64 },

    #[error("infeasible instance: cell sizes sum to {cells_total}, classes hold {class_total}")]
    Infeasible { cells_total: u64, class_total: u64 },

    #[error("brute-force guard exceeded ({reason}); estimated enumeration size {estimate}")]
    GuardExceeded { reason: String, estimate: u128 },

    #[error("estimated solver memory {estimate} bytes exceeds budget {budget} bytes; consider the greedy solver")]
    MemoryBudget { estimate: u128, budget: u64 },

    #[error("per-class sizes are only supported by the brute-force solver (got {solver})")]
    PerClassUnsupported { solver: &'static str },

    #[error("record {sample_id} is missing true_label")]
    MissingTrueLabel { sample_id: String },

    #[error("embedding labels are required for this operation")]
    MissingLabels,

    #[error("representative set is empty")]
    EmptyRepresentatives,

    #[error("could not draw a pair with distinct vectors after {retries} retries")]
    DegeneratePair { retries: u32 },

    #[error("sample sets do not match: {detail}")]
    SampleSetMismatch { detail: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
