use thiserror::Error;

/// Errors produced by the dyadic laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0}; only d = 1 and d = 2 are available")]
    UnsupportedDimension(u32),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("cube at level {level} has no children on a mesh of depth {depth}")]
    NoChildren { level: u32, depth: u32 },

    #[error("cannot take the {steps}-th parent of a cube at level {level}")]
    OutOfGrid { level: u32, steps: u32 },

    #[error("cube does not belong to this mesh: {0}")]
    ForeignCube(String),

    #[error("invalid weight: cell {index} has value {value}")]
    InvalidWeight { index: usize, value: f64 },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid Young function: {0}")]
    InvalidYoung(String),

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("operation requires a positive shift (all Haar coefficients >= 0)")]
    NotPositive,

    #[error("invalid sparse family: {0}")]
    InvalidFamily(String),

    #[error("family cube at level {level} is shallower than the requested parent order {order}")]
    ShallowFamilyCube { level: u32, order: u32 },

    #[error("invalid spec `{spec}`: {reason}")]
    InvalidSpec { spec: String, reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn spec(spec: &str, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            spec: spec.to_string(),
            reason: reason.into(),
        }
    }
}
