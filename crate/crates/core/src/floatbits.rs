//! Bit-exact decomposition of FP32 and BF16 scalars into sign, exponent and
//! mantissa fields, plus the rounding conversions between the two formats.
//!
//! Both formats share an 8-bit exponent with bias 127; bf16 is the top 16
//! bits of the equivalent f32 pattern. Bf16 values are carried around as
//! `f32` whose low 16 mantissa bits are zero, so widening is free and every
//! field operation can be phrased on `f32` bits.
//!
//! Subnormals are flushed to zero in both directions: `extract` reports them
//! as zero and `compose` maps a zero exponent field to +0.0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar storage format of a tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dtype {
    Fp32,
    Bf16,
}

impl Dtype {
    pub const fn exponent_bits(self) -> u32 {
        8
    }

    pub const fn mantissa_bits(self) -> u32 {
        match self {
            Dtype::Fp32 => 23,
            Dtype::Bf16 => 7,
        }
    }

    /// Exponent bias, `2^(exponent_bits - 1) - 1` for both formats.
    pub const fn bias(self) -> u32 {
        127
    }

    /// Round an f32 intermediate to this storage format (round to nearest
    /// even). Identity for `Fp32`.
    pub fn round(self, x: f32) -> f32 {
        match self {
            Dtype::Fp32 => x,
            Dtype::Bf16 => f32_from_bf16_bits(bf16_bits_from_f32(x)),
        }
    }

    /// Round a double-precision intermediate to this storage format with a
    /// single rounding step.
    pub fn round_f64(self, x: f64) -> f32 {
        match self {
            Dtype::Fp32 => x as f32,
            Dtype::Bf16 => f32_from_bf16_bits(bf16_bits_from_f64(x)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::Fp32 => "fp32",
            Dtype::Bf16 => "bf16",
        }
    }
}

/// The sign/exponent/mantissa fields of one scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FloatParts {
    /// Sign bit, 0 or 1.
    pub sign: u32,
    /// Biased exponent field, `< 2^8`.
    pub biased_exponent: u32,
    /// Mantissa field, `< 2^mantissa_bits`.
    pub mantissa: u32,
    pub dtype: Dtype,
}

/// Split `v` into bit fields without checking finiteness. Subnormal inputs
/// collapse to the zero encoding (sign preserved).
pub(crate) fn raw_fields(v: f32, dtype: Dtype) -> FloatParts {
    let (sign, exponent, mantissa) = match dtype {
        Dtype::Fp32 => {
            let bits = v.to_bits();
            (bits >> 31, (bits >> 23) & 0xFF, bits & 0x7F_FFFF)
        }
        Dtype::Bf16 => {
            debug_assert_eq!(v.to_bits() & 0xFFFF, 0, "value is not bf16-representable");
            let bits = v.to_bits() >> 16;
            (bits >> 15, (bits >> 7) & 0xFF, bits & 0x7F)
        }
    };
    let (biased_exponent, mantissa) = if exponent == 0 {
        (0, 0)
    } else {
        (exponent, mantissa)
    };
    FloatParts {
        sign,
        biased_exponent,
        mantissa,
        dtype,
    }
}

/// Decompose a finite scalar into its IEEE-754 bit fields.
///
/// Subnormal inputs are reported as zero. NaN and infinity are rejected
/// because the kernels only operate on finite tensors.
pub fn extract(v: f32, dtype: Dtype) -> Result<FloatParts> {
    if !v.is_finite() {
        return Err(Error::NonFinite {
            context: "extract",
            value: v as f64,
        });
    }
    Ok(raw_fields(v, dtype))
}

/// Reassemble a scalar from its bit fields.
///
/// A zero exponent field yields +0.0 regardless of sign and mantissa.
pub fn compose(parts: FloatParts) -> f32 {
    debug_assert!(parts.sign <= 1);
    debug_assert!(parts.biased_exponent < 1 << parts.dtype.exponent_bits());
    debug_assert!(parts.mantissa < 1 << parts.dtype.mantissa_bits());
    if parts.biased_exponent == 0 {
        return 0.0;
    }
    match parts.dtype {
        Dtype::Fp32 => {
            f32::from_bits(parts.sign << 31 | parts.biased_exponent << 23 | parts.mantissa)
        }
        Dtype::Bf16 => f32_from_bf16_bits(
            (parts.sign << 15 | parts.biased_exponent << 7 | parts.mantissa) as u16,
        ),
    }
}

/// Round an f32 to the nearest bf16 bit pattern, ties to even.
///
/// Values beyond the bf16 range round to the infinity encoding; callers that
/// need finite results must reject those inputs themselves.
pub fn bf16_bits_from_f32(v: f32) -> u16 {
    let bits = v.to_bits();
    let round_bias = 0x7FFF + ((bits >> 16) & 1);
    (bits.wrapping_add(round_bias) >> 16) as u16
}

/// Widen a bf16 bit pattern to the f32 with identical value.
pub fn f32_from_bf16_bits(bits: u16) -> f32 {
    f32::from_bits((bits as u32) << 16)
}

/// Round an f32 to bf16 and widen back, a value-level convenience over
/// [`bf16_bits_from_f32`].
pub fn round_to_bf16(v: f32) -> f32 {
    f32_from_bf16_bits(bf16_bits_from_f32(v))
}

/// Round an f64 directly to the nearest bf16 bit pattern, ties to even.
///
/// One rounding step; going through f32 first could double-round.
pub fn bf16_bits_from_f64(v: f64) -> u16 {
    let bits = v.to_bits();
    let sign = (((bits >> 63) as u16) & 1) << 15;
    let exponent = ((bits >> 52) & 0x7FF) as i64;
    let mantissa = bits & 0xF_FFFF_FFFF_FFFF;
    if exponent == 0x7FF {
        // Infinity or NaN; preserve the class.
        return sign | 0x7F80 | if mantissa != 0 { 0x40 } else { 0 };
    }
    if exponent == 0 {
        // f64 subnormals are far below the bf16 normal range.
        return sign;
    }
    let mut biased = exponent - 1023 + 127;
    if biased >= 0xFF {
        return sign | 0x7F80;
    }
    if biased <= 0 {
        // Would be subnormal in bf16: flush to zero.
        return sign;
    }
    // 53-bit significand down to 8 bits, round to nearest even.
    let significand = (1u64 << 52) | mantissa;
    let shift = 45;
    let halfway = 1u64 << (shift - 1);
    let remainder = significand & ((1u64 << shift) - 1);
    let mut rounded = significand >> shift;
    if remainder > halfway || (remainder == halfway && rounded & 1 == 1) {
        rounded += 1;
    }
    if rounded == 1 << 8 {
        // Carry out of the mantissa.
        rounded >>= 1;
        biased += 1;
        if biased >= 0xFF {
            return sign | 0x7F80;
        }
    }
    sign | ((biased as u16) << 7) | ((rounded & 0x7F) as u16)
}
