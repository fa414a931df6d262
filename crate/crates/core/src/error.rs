use alloc::string::String;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition (shape, range, consistency).
    #[error("validation error: {0}")]
    Validation(String),
    /// A run-length encoding could not be decoded onto the requested grid.
    #[error("decode error: {0}")]
    Decode(String),
    /// Statistics over the data are degenerate (e.g. a zero-variance channel).
    #[error("degenerate data: {0}")]
    Degenerate(String),
    /// A non-finite value appeared where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Model configuration cannot be realised.
    #[error("construction error: {0}")]
    Construction(String),
    /// Weight transfer failed (missing tensor, shape mismatch, wrong family).
    #[error("load error: {0}")]
    Load(String),
    /// AUC is undefined when the labels contain a single class.
    #[error("AUC undefined: labels contain only {0}")]
    UndefinedAuc(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::Error::$kind(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
