use std::fmt;
use std::ops::Add;

/// An ultrametric absolute value q^e, or the norm of zero.
///
/// The derived ordering puts `Zero` below every `Exp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LogNorm {
    Zero,
    Exp(i64),
}

impl LogNorm {
    pub fn exp(self) -> Option<i64> {
        match self {
            LogNorm::Zero => None,
            LogNorm::Exp(e) => Some(e),
        }
    }

    pub fn is_zero(self) -> bool {
        self == LogNorm::Zero
    }

    /// Norm after multiplying by an element of norm q^k.
    pub fn shift(self, k: i64) -> Self {
        match self {
            LogNorm::Zero => LogNorm::Zero,
            LogNorm::Exp(e) => LogNorm::Exp(e + k),
        }
    }

    /// True when the norm is at most q^e.
    pub fn le_exp(self, e: i64) -> bool {
        self <= LogNorm::Exp(e)
    }
}

/// Multiplicativity: |xy| = |x||y|.
impl Add for LogNorm {
    type Output = LogNorm;
    fn add(self, rhs: LogNorm) -> LogNorm {
        match (self, rhs) {
            (LogNorm::Exp(a), LogNorm::Exp(b)) => LogNorm::Exp(a + b),
            _ => LogNorm::Zero,
        }
    }
}

impl fmt::Display for LogNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LogNorm::Zero => write!(f, "0"),
            LogNorm::Exp(e) => write!(f, "q^{e}"),
        }
    }
}
