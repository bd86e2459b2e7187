//! Attention kernels built around a fused exponential-multiply operator.
//!
//! The fused operator computes `e^x * v` for `x <= 0` as an integer
//! decrement of each element's floating-point exponent field: the exponent
//! argument is clipped, quantized to Q6.10 fixed point, and multiplied by
//! `log2(e)` with two arithmetic shifts, yielding a power-of-two factor that
//! needs no floating-point exponential, multiplier, or dequantization.
//!
//! On top of the operator sit three streaming attention kernels (a two-pass
//! baseline with lazy softmax division, the single-pass online variant, and
//! the fused variant), a double-precision reference implementation, and the
//! error metrics used to quantify what the power-of-two shortcut costs.

pub mod error;
pub mod expmul;
pub mod fixedlog;
pub mod floatbits;
pub mod kernels;
pub mod refmodel;
pub mod tensor;

pub use error::{Error, Result};
pub use expmul::expmul;
pub use fixedlog::{clip, log2exp, to_fixed, FixedQ, LHat};
pub use floatbits::{compose, extract, Dtype, FloatParts};
pub use kernels::{
    attention_baseline_lazy, attention_flash2, attention_flash2_expmul,
    attention_flash2_expmul_with_stats, attention_flash2_f64, dot, max_update, run_kernel, ExpMode,
    KernelKind, KernelRun, MergedState,
};
pub use refmodel::{compare, oracle_attention, pwl_exp, AccuracyReport, PwlExp};
pub use tensor::{MatF64, Tensor};
