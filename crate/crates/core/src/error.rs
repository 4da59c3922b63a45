use thiserror::Error;

/// Errors raised by the library.
///
/// Variants split into two families: input/validation problems
/// ([`Error::is_degenerate`] returns `false`) and numerical degeneracies
/// where the input is well formed but the requested quantity does not exist.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-binary value {value:?} at row {row}, column {column} (line {line})")]
    DomainViolation {
        row: usize,
        column: usize,
        line: u64,
        value: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("score matrix too small: {examinees} examinees x {items} items (need at least 2 x 2)")]
    TooSmall { examinees: usize, items: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{what} = {value} is outside [{low}, {high}]")]
    Range {
        what: &'static str,
        value: f64,
        low: f64,
        high: f64,
    },

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("undefined: {0}")]
    Undefined(&'static str),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("degenerate: {0}")]
    Degenerate(String),
}

impl Error {
    /// `true` for errors caused by degenerate mathematics rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance(_) | Error::Undefined(_) | Error::SingularMatrix | Error::Degenerate(_)
        )
    }

    /// Short machine-readable name of the variant.
    pub fn name(&self) -> &'static str {
        match self {
            Error::DomainViolation { .. } => "DomainViolation",
            Error::Shape(_) => "ShapeError",
            Error::TooSmall { .. } => "TooSmall",
            Error::Parse(_) => "ParseError",
            Error::Unsupported(_) => "Unsupported",
            Error::Range { .. } => "RangeError",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::Undefined(_) => "Undefined",
            Error::SingularMatrix => "SingularMatrix",
            Error::Degenerate(_) => "Degenerate",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
