use thiserror::Error;

use crate::data::ClassId;

/// Errors produced by dataset validation, scorer training, and metric
/// computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("label {0} does not belong to the seen or unseen class set")]
    UnknownLabel(ClassId),

    #[error("the seen class set is empty")]
    EmptySeenSet,

    #[error("the unseen class set is empty; joint scoring needs at least one unseen class")]
    EmptyUnseenSet,

    #[error("class {0} appears more than once across the seen/unseen sets")]
    PartitionOverlap(ClassId),

    #[error("embedding row for class {0} has zero norm and cannot be normalized")]
    ZeroVectorEmbedding(ClassId),

    #[error("class {class} has {available} samples, too few to {action}")]
    ClassTooSmall {
        class: ClassId,
        available: usize,
        action: &'static str,
    },

    #[error("class {0} has no samples in the provided data")]
    ClassWithoutSamples(ClassId),

    #[error("training requires at least two classes, got {0}")]
    SingleClass(usize),

    #[error("feature matrix is degenerate: {0}")]
    DegenerateFeatures(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("row count mismatch: seen block has {seen} rows, unseen block has {unseen}")]
    RowCountMismatch { seen: usize, unseen: usize },

    #[error("length mismatch: expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("k={k} is too large: {reason}")]
    KTooLarge { k: usize, reason: String },

    #[error("top-k predictions carry {got} entries per row, expected {expected}")]
    KMismatch { expected: usize, got: usize },

    #[error("class {0} from the evaluated class set has no test samples")]
    EmptyClassInTest(ClassId),

    #[error("the test set has no samples from the {0} side")]
    MissingSide(&'static str),

    #[error("curve has {0} points, need at least 2")]
    DegenerateCurve(usize),

    #[error("all reference points coincide; local outlier scores are undefined")]
    DegenerateReference,

    #[error("requested {shots} shots but class {class} has only {available} samples")]
    NotEnoughShots {
        class: ClassId,
        shots: usize,
        available: usize,
    },

    #[error("cross-validation needs at least {needed} seen classes, got {got}")]
    TooFewClasses { needed: usize, got: usize },

    #[error("hyperparameter grid is empty")]
    EmptyGrid,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;
