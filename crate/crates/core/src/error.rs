use thiserror::Error;

/// Errors produced by the evaluation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed BMP header: {0}")]
    MalformedHeader(String),
    #[error("unsupported BMP encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("gray value {value} at pixel (x={x}, y={y}) is not one of 0, 128, 255")]
    StrictValueViolation { x: u32, y: u32, value: u8 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("missing predictions for {} image(s): {}", .0.len(), .0.join(", "))]
    MissingPrediction(Vec<String>),
    #[error("invalid ground truth for image {0}: empty optic disc region")]
    InvalidGroundTruth(String),
    #[error("labels must contain at least one positive and one negative case")]
    DegenerateLabels,
    #[error("image id mismatch: {0}")]
    IdMismatch(String),
    #[error("duplicate id: {0}")]
    DuplicateId(String),
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("invalid weights: {0}")]
    BadWeights(String),
    #[error("incomplete row: {0}")]
    IncompleteRow(String),
    #[error("at least two masks are required, got {0}")]
    TooFewMasks(usize),
    #[error("conflicting labels for image {0}")]
    LabelConflict(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample is empty")]
    EmptySample,
    #[error("at least two groups are required, got {0}")]
    TooFewGroups(usize),
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("ellipse does not fit inside a {width}x{height} image")]
    OutOfBounds { width: u32, height: u32 },
    #[error("infeasible configuration: {0}")]
    InfeasibleConfig(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
