//! The clip / fixed-point / shift-add pipeline that turns a non-positive
//! exponent argument into an integer power-of-two decrement.
//!
//! `log2exp(x)` approximates `-x * log2(e)` for `x <= 0` as a small
//! non-negative integer: the input is clipped to `[-15, 0]`, converted to
//! Q6.10 fixed point, multiplied by `1 + 1/2 - 1/16 = 1.4375` using two
//! arithmetic shifts, and rounded back to an integer. The result is the
//! number of exponent steps by which `e^x * v` shrinks `v`.

/// Lower clip bound; `e^-15` is already ~3.1e-7, so anything below
/// contributes nothing at these precisions.
pub const CLIP_MIN: f32 = -15.0;

const FRAC_BITS: u32 = 10;
const FRAC_ONE: i32 = 1 << FRAC_BITS;

/// A Q6.10 fixed-point value: 16-bit two's complement, 6 integer bits
/// (sign included) and 10 fraction bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct FixedQ {
    raw: i16,
}

impl FixedQ {
    pub fn raw(self) -> i16 {
        self.raw
    }

    pub fn to_f64(self) -> f64 {
        self.raw as f64 / FRAC_ONE as f64
    }
}

/// The integer exponent decrement produced by [`log2exp`], always in
/// `[0, 22]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct LHat(u8);

impl LHat {
    pub fn get(self) -> u32 {
        self.0 as u32
    }
}

/// Clamp `x` to `[-15, 0]`. The `-inf` sentinel used to initialize running
/// maxima clips to `-15`.
pub fn clip(x: f32) -> f32 {
    assert!(!x.is_nan(), "clip: NaN input");
    x.clamp(CLIP_MIN, 0.0)
}

/// Convert a value in `[-15, 0]` to Q6.10, rounding ties to even.
pub fn to_fixed(x: f32) -> FixedQ {
    assert!(
        (CLIP_MIN..=0.0).contains(&x),
        "to_fixed: {x} outside [{CLIP_MIN}, 0]"
    );
    // x * 1024 is exact in f64, so the tie-even rounding is the only
    // rounding step.
    let raw = ((x as f64) * FRAC_ONE as f64).round_ties_even() as i32;
    FixedQ { raw: raw as i16 }
}

/// Shift-add approximation of `-x * log2(e)` rounded to an integer.
///
/// Requires `x <= 0` (the `-inf` sentinel is accepted and clips to `-15`).
pub fn log2exp(x: f32) -> LHat {
    assert!(x <= 0.0, "log2exp: input {x} must be <= 0");
    let xhat = to_fixed(clip(x)).raw() as i32;
    // Wide intermediate; the Q6.10 sum stays within +/-2^15 today but the
    // coefficients should not be one tweak away from wraparound.
    let t = xhat + (xhat >> 1) - (xhat >> 4);
    let l = -round_q10_ties_even(t);
    debug_assert!((0..=22).contains(&l), "lhat {l} out of range");
    LHat(l as u8)
}

/// Round a Q6.10-scaled integer to the nearest whole integer, ties to even.
fn round_q10_ties_even(t: i32) -> i32 {
    let quotient = t >> FRAC_BITS;
    let remainder = t & (FRAC_ONE - 1);
    match remainder.cmp(&(FRAC_ONE / 2)) {
        std::cmp::Ordering::Greater => quotient + 1,
        std::cmp::Ordering::Less => quotient,
        std::cmp::Ordering::Equal => quotient + (quotient & 1),
    }
}
