//! The fused operator `expmul(x, v) = e^x * v`, realized as a per-element
//! exponent-field decrement instead of an exponential plus a multiply.
//!
//! The scalar factor `e^x` for `x <= 0` is replaced by `2^-lhat` with
//! `lhat = log2exp(x)`; applying it to a float only touches the exponent
//! field, so sign and mantissa bits pass through untouched and the result
//! needs no dequantization step. Results whose exponent field would reach
//! zero or below flush to +0.0.

use crate::error::{Error, Result};
use crate::fixedlog::{log2exp, LHat};
use crate::floatbits::{compose, raw_fields, Dtype, FloatParts};

/// Compute `e^x * v[i]` for every element by decrementing exponent fields.
///
/// `x` must be `<= 0` (the `-inf` sentinel is accepted); elements must be
/// finite. The decrement is computed once per call, not per element.
pub fn expmul(x: f32, v: &[f32], dtype: Dtype) -> Result<Vec<f32>> {
    let lhat = log2exp(x);
    v.iter()
        .map(|&elem| {
            if !elem.is_finite() {
                return Err(Error::NonFinite {
                    context: "expmul",
                    value: elem as f64,
                });
            }
            Ok(scale_by_lhat(elem, lhat, dtype))
        })
        .collect()
}

/// Multiply one finite scalar by `2^-lhat` exactly.
///
/// Zero passes through unchanged; a nonzero value whose exponent field
/// cannot absorb the decrement flushes to +0.0.
pub(crate) fn scale_by_lhat(v: f32, lhat: LHat, dtype: Dtype) -> f32 {
    debug_assert!(v.is_finite());
    if v == 0.0 {
        return v;
    }
    let parts = raw_fields(v, dtype);
    if parts.biased_exponent <= lhat.get() {
        return 0.0;
    }
    compose(FloatParts {
        biased_exponent: parts.biased_exponent - lhat.get(),
        ..parts
    })
}
