use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TstError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty intersection on the {side} side; one-sided distance undefined")]
    EmptyIntersection { side: Side },

    #[error("cube construction violated clause {clause}: {detail}")]
    CubeInvariant { clause: String, detail: String },

    #[error("structural CCBP violation ({condition}) at {indices}")]
    CcbpStructure { condition: String, indices: String },

    #[error("displacement bound violated at layer {layer}: {observed} > {bound}")]
    DisplacementBound { layer: usize, observed: f64, bound: f64 },

    #[error("not a graph over P[{layer},{index}]: normal gap {gap} above floor {floor}")]
    NotAGraph { layer: usize, index: usize, gap: f64, floor: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Side {
    First,
    Second,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::First => write!(f, "first"),
            Side::Second => write!(f, "second"),
        }
    }
}

impl From<std::io::Error> for TstError {
    fn from(e: std::io::Error) -> Self {
        TstError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for TstError {
    fn from(e: serde_json::Error) -> Self {
        TstError::Format(e.to_string())
    }
}

impl From<csv::Error> for TstError {
    fn from(e: csv::Error) -> Self {
        TstError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, TstError>;
