//! Row-major matrices: the dtype-tagged `Tensor` the kernels consume and the
//! plain double-precision `MatF64` the reference path produces.

use crate::error::{Error, Result};
use crate::floatbits::Dtype;

/// A dtype-tagged row-major matrix of finite scalars.
///
/// Bf16 tensors store each value as the f32 with identical value (low 16
/// mantissa bits zero), so kernel arithmetic can widen for free.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    dtype: Dtype,
    data: Vec<f32>,
}

impl Tensor {
    /// Wrap already-representable data. Rejects length mismatches,
    /// non-finite values, and (for bf16) values with low mantissa bits set.
    pub fn new(rows: usize, cols: usize, dtype: Dtype, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} tensor needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "tensor data",
                    value: v as f64,
                });
            }
            if dtype == Dtype::Bf16 && v.to_bits() & 0xFFFF != 0 {
                return Err(Error::Shape(format!(
                    "value {v} is not representable in bf16"
                )));
            }
        }
        Ok(Self {
            rows,
            cols,
            dtype,
            data,
        })
    }

    /// Build a tensor from f32 data, rounding each value to `dtype` first.
    /// Values that overflow bf16 are rejected rather than stored as infinity.
    pub fn from_f32(rows: usize, cols: usize, dtype: Dtype, data: Vec<f32>) -> Result<Self> {
        let rounded: Vec<f32> = data.iter().map(|&v| dtype.round(v)).collect();
        for (&r, &v) in rounded.iter().zip(data.iter()) {
            if !r.is_finite() && v.is_finite() {
                return Err(Error::Bf16Overflow(v));
            }
        }
        Self::new(rows, cols, dtype, rounded)
    }

    pub fn zeros(rows: usize, cols: usize, dtype: Dtype) -> Self {
        Self {
            rows,
            cols,
            dtype,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }
}

/// A row-major double-precision matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct MatF64 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatF64 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}
