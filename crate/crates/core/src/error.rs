use thiserror::Error;

/// Errors reported by tensor validation and the attention kernels.
#[derive(Debug, Error)]
pub enum Error {
    /// A NaN or infinity reached an operation that requires finite inputs.
    #[error("non-finite value {value} in {context}")]
    NonFinite { context: &'static str, value: f64 },

    /// Matrix or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Attention over zero key/value rows has no defined output.
    #[error("sequence length must be at least 1")]
    EmptySequence,

    /// A value cannot be stored in bf16 without overflowing to infinity.
    #[error("value {0} overflows the bf16 range")]
    Bf16Overflow(f32),
}

pub type Result<T> = std::result::Result<T, Error>;
