//! The double-precision reference path: ground-truth attention, the
//! piecewise-linear exponential used by the baseline hardware model, and the
//! error metrics comparing a kernel run against the reference.

use std::sync::LazyLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{MatF64, Tensor};

/// A piecewise-linear interpolant of `e^x` over `[-15, 0]` with uniform
/// segments, exact at the knots.
#[derive(Clone, Debug)]
pub struct PwlExp {
    knots: Vec<f64>,
    x_lo: f64,
    step: f64,
}

impl PwlExp {
    pub fn new(segments: usize) -> Self {
        assert!(segments >= 1);
        let x_lo = -15.0f64;
        let step = 15.0 / segments as f64;
        let knots = (0..=segments)
            .map(|k| (x_lo + k as f64 * step).exp())
            .collect();
        Self { knots, x_lo, step }
    }

    pub fn segments(&self) -> usize {
        self.knots.len() - 1
    }

    /// Evaluate the interpolant. `x` must lie in `[-15, 0]`.
    pub fn eval(&self, x: f64) -> f64 {
        assert!(
            (self.x_lo..=0.0).contains(&x),
            "pwl_exp: {x} outside [-15, 0]"
        );
        let segments = self.segments();
        let k = (((x - self.x_lo) / self.step) as usize).min(segments - 1);
        let u = (x - (self.x_lo + k as f64 * self.step)) / self.step;
        // Return knot values untouched so the knots are exact.
        if u <= 0.0 {
            self.knots[k]
        } else if u >= 1.0 {
            self.knots[k + 1]
        } else {
            self.knots[k] + u * (self.knots[k + 1] - self.knots[k])
        }
    }
}

static PWL_EXP_16: LazyLock<PwlExp> = LazyLock::new(|| PwlExp::new(16));

/// The default 16-segment interpolant of `e^x` on `[-15, 0]`.
pub fn pwl_exp(x: f64) -> f64 {
    PWL_EXP_16.eval(x)
}

/// Ground-truth attention: two-pass max-subtracted softmax, entirely in
/// double precision.
pub fn oracle_attention(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<MatF64> {
    let d = q.cols();
    if k.cols() != d || v.cols() != d || k.rows() != v.rows() {
        return Err(Error::Shape(format!(
            "oracle: q is {}x{}, k is {}x{}, v is {}x{}",
            q.rows(),
            q.cols(),
            k.rows(),
            k.cols(),
            v.rows(),
            v.cols()
        )));
    }
    let n = k.rows();
    if n == 0 {
        return Err(Error::EmptySequence);
    }
    let mut out = MatF64::zeros(q.rows(), d);
    for r in 0..q.rows() {
        let q_row = q.row(r);
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                q_row
                    .iter()
                    .zip(k.row(i).iter())
                    .map(|(&a, &b)| a as f64 * b as f64)
                    .sum()
            })
            .collect();
        let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weight_sum = 0.0f64;
        let mut acc = vec![0.0f64; d];
        for (i, &s) in scores.iter().enumerate() {
            let w = (s - m).exp();
            weight_sum += w;
            for (a, &vj) in acc.iter_mut().zip(v.row(i).iter()) {
                *a += w * vj as f64;
            }
        }
        for (j, &a) in acc.iter().enumerate() {
            out.data[r * d + j] = a / weight_sum;
        }
    }
    Ok(out)
}

/// Error metrics for one kernel run against the double-precision reference.
#[derive(Clone, Debug, Serialize)]
pub struct AccuracyReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    pub mean_abs_err: f64,
    /// Minimum over query rows of the cosine similarity with the reference.
    pub cosine_similarity_min: f64,
    /// Flush-to-zero events reported by the kernel run; metrics alone cannot
    /// observe them, so the caller fills this in from kernel statistics.
    pub flushed_count: u64,
}

impl AccuracyReport {
    pub fn with_flushed(mut self, flushed: u64) -> Self {
        self.flushed_count = flushed;
        self
    }
}

/// Compare a kernel output element-wise against the reference matrix.
///
/// Relative error uses a `|ref| + 1e-30` denominator guard; cosine
/// similarity treats two zero rows as identical.
pub fn compare(out: &Tensor, reference: &MatF64) -> Result<AccuracyReport> {
    if out.rows() != reference.rows || out.cols() != reference.cols {
        return Err(Error::Shape(format!(
            "compare: output is {}x{} but reference is {}x{}",
            out.rows(),
            out.cols(),
            reference.rows,
            reference.cols
        )));
    }
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    let mut sum_abs = 0.0f64;
    let mut cosine_min = 1.0f64;
    for r in 0..out.rows() {
        let got = out.row(r);
        let want = reference.row(r);
        let mut dot = 0.0f64;
        let mut norm_got = 0.0f64;
        let mut norm_want = 0.0f64;
        for (&g, &w) in got.iter().zip(want.iter()) {
            let g = g as f64;
            let abs = (g - w).abs();
            max_abs = max_abs.max(abs);
            sum_abs += abs;
            max_rel = max_rel.max(abs / (w.abs() + 1e-30));
            dot += g * w;
            norm_got += g * g;
            norm_want += w * w;
        }
        let cosine = if norm_got == 0.0 && norm_want == 0.0 {
            1.0
        } else if norm_got == 0.0 || norm_want == 0.0 {
            0.0
        } else {
            // sqrt of the product keeps identical rows at exactly 1.0.
            (dot / (norm_got * norm_want).sqrt()).clamp(-1.0, 1.0)
        };
        cosine_min = cosine_min.min(cosine);
    }
    let count = (out.rows() * out.cols()) as f64;
    Ok(AccuracyReport {
        max_abs_err: max_abs,
        max_rel_err: max_rel,
        mean_abs_err: sum_abs / count,
        cosine_similarity_min: cosine_min,
        flushed_count: 0,
    })
}
