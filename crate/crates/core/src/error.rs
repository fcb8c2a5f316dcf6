use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dual activation argument {value} lies outside [-1, 1]")]
    Domain { value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("prior column {index} has zero norm")]
    ZeroColumn { index: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("row {row} has no observed entries")]
    EmptyRow { row: usize },

    #[error("kernel system is singular ({0}); retry with a trace-scaled ridge such as --ridge trace:4e-5")]
    Singular(String),

    #[error("iterative solver diverged: {0}; retry with a smaller --kernel-scale")]
    Divergence(String),

    #[error("degenerate prior: zero variance at pixel ({i}, {j})")]
    DegeneratePrior { i: usize, j: usize },

    #[error("prior is not stationary: {0}")]
    NonStationary(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("architecture error at layer {layer}: {message}")]
    Arch { layer: usize, message: String },

    #[error("missing key `{0}` and no default vector")]
    MissingKey(String),

    #[error("{metric} is undefined: {reason}")]
    Metric {
        metric: &'static str,
        reason: String,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::Format(_)
            | Error::Io(_)
            | Error::Image(_)
            | Error::Csv(_) => 4,
            Error::InvalidParameter(_)
            | Error::Shape(_)
            | Error::Index(_)
            | Error::Unsupported(_)
            | Error::Arch { .. }
            | Error::MissingKey(_) => 2,
            _ => 3,
        }
    }
}
