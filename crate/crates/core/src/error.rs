use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("row {row} sums to {sum}, outside tolerance of {target}")]
    RowSum { row: usize, sum: f64, target: f64 },

    #[error("entry ({row}, {col}) = {value} violates constraint: {reason}")]
    Entry {
        row: usize,
        col: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("matrix has no real logarithm: {0}")]
    NoRealLogarithm(String),

    #[error("matrix is numerically singular")]
    Singular,

    #[error("invalid rating scale: {0}")]
    Scale(String),

    #[error("event {event_id}: {message}")]
    Event { event_id: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no usable events: {0}")]
    NoData(String),

    #[error("estimation at {date}: {source}")]
    AtDate {
        date: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn event(id: &str, message: impl Into<String>) -> Self {
        Error::Event {
            event_id: id.to_string(),
            message: message.into(),
        }
    }

    /// True when the error originates from the data rather than from a caller mistake.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::AtDate { source, .. } => source.is_data_error(),
            Error::Event { .. }
            | Error::Parse { .. }
            | Error::NoData(_)
            | Error::Csv(_)
            | Error::RowSum { .. }
            | Error::Entry { .. }
            | Error::NoRealLogarithm(_) => true,
            _ => false,
        }
    }
}
