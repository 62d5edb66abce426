use thiserror::Error;

/// Errors raised by the arithmetic kernels and the experiment layer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid field size {0}: not a prime power in the supported range")]
    InvalidField(u64),
    #[error("division by the zero polynomial")]
    DivisionByZero,
    /// A value is zero to the precision carried, so its norm or inverse is unknown.
    #[error("precision loss: value is zero to precision (known down to exponent {floor})")]
    PrecisionLoss { floor: i64 },
    #[error("precision exhausted before the first continued-fraction term")]
    PrecisionExhausted,
    #[error("singular basis")]
    Singular,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("r(t) undefined at t = {t}: matching equation has no nonnegative solution")]
    RtUndefined { t: i64 },
    #[error("flow time {t} exceeds certified horizon {horizon}")]
    BeyondHorizon { t: i64, horizon: i64 },
    #[error("degree overflow: {0}")]
    DegreeOverflow(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// Precision-class failures map to exit code 3 in the CLI.
    pub fn is_precision(&self) -> bool {
        matches!(
            self,
            Error::PrecisionLoss { .. }
                | Error::PrecisionExhausted
                | Error::BeyondHorizon { .. }
                | Error::InsufficientPrecision(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
