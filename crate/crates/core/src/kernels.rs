//! The attention kernels: a two-pass baseline with lazy softmax division, the
//! single-pass online variant with delayed division, and the fused variant
//! that replaces every `e^x * v` with an exponent decrement.
//!
//! All three stream one key and one value row per step. Queries are
//! independent, so the outer loop runs in parallel; per-query results are
//! bit-identical at any thread count because no state is shared across rows.
//!
//! Arithmetic policy: scores and state updates are computed in f32; when the
//! tensor dtype is bf16 every stored intermediate is rounded back to bf16
//! once per step. Exact exponentials are evaluated in f64 and rounded to the
//! dtype.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expmul::scale_by_lhat;
use crate::fixedlog::{clip, log2exp};
use crate::floatbits::Dtype;
use crate::refmodel::pwl_exp;
use crate::tensor::{MatF64, Tensor};

/// How the exact kernels evaluate `e^x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpMode {
    /// Platform exponential in double precision, rounded to the dtype.
    Accurate,
    /// Piecewise-linear model of the baseline hardware exponential.
    Pwl,
}

/// Which attention kernel to run. The fused variant has no exponential mode;
/// its exponentials are exponent decrements by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    BaselineLazy { exp: ExpMode },
    Flash2Exact { exp: ExpMode },
    Flash2ExpMul,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::BaselineLazy { .. } => "baseline",
            KernelKind::Flash2Exact { .. } => "flash2",
            KernelKind::Flash2ExpMul => "flash2-expmul",
        }
    }
}

/// A kernel output together with run statistics.
#[derive(Clone, Debug)]
pub struct KernelRun {
    pub output: Tensor,
    /// Number of nonzero elements the fused kernel flushed to zero; always 0
    /// for the exact kernels.
    pub flushed: u64,
}

/// Dot product of two equal-length vectors, accumulated in f32 and rounded
/// to the dtype. No `1/sqrt(d)` scaling is applied here.
pub fn dot(a: &[f32], b: &[f32], dtype: Dtype) -> Result<f32> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "dot of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dtype.round(dot_f32(a, b)))
}

fn dot_f32(a: &[f32], b: &[f32]) -> f32 {
    let mut sum = 0.0f32;
    for (x, y) in a.iter().zip(b.iter()) {
        sum += x * y;
    }
    sum
}

/// Running-maximum update; ties keep the shared value.
pub fn max_update(m_prev: f32, s: f32) -> f32 {
    m_prev.max(s)
}

fn eval_exp(x: f32, mode: ExpMode, dtype: Dtype) -> f32 {
    match mode {
        ExpMode::Accurate => dtype.round_f64((x as f64).exp()),
        ExpMode::Pwl => dtype.round_f64(pwl_exp(clip(x) as f64)),
    }
}

/// The per-query state of the fused kernel: the running maximum and the
/// merged vector `[l, o]`, where element 0 accumulates the softmax
/// normalizer alongside the output.
#[derive(Clone, Debug)]
pub struct MergedState {
    m: f32,
    merged: Vec<f32>,
}

impl MergedState {
    pub fn new(d: usize) -> Self {
        Self {
            m: f32::NEG_INFINITY,
            merged: vec![0.0; d + 1],
        }
    }

    pub fn running_max(&self) -> f32 {
        self.m
    }

    /// The accumulated softmax normalizer (element 0 of the merged vector).
    pub fn weight_sum(&self) -> f32 {
        self.merged[0]
    }

    pub fn merged(&self) -> &[f32] {
        &self.merged
    }

    /// One streaming step: rescale the carried state by `2^-lhat(m - m')`
    /// and add the value row (extended by the implicit leading 1) scaled by
    /// `2^-lhat(s - m')`. Returns the number of flush-to-zero events.
    pub fn update(&mut self, s: f32, v_row: &[f32], dtype: Dtype) -> u64 {
        debug_assert_eq!(v_row.len() + 1, self.merged.len());
        let m_new = max_update(self.m, s);
        let lhat_carry = log2exp(self.m - m_new);
        let lhat_fresh = log2exp(s - m_new);
        let mut flushed = 0;
        for (j, slot) in self.merged.iter_mut().enumerate() {
            let fresh = if j == 0 { 1.0 } else { v_row[j - 1] };
            let carried = scale_by_lhat(*slot, lhat_carry, dtype);
            let added = scale_by_lhat(fresh, lhat_fresh, dtype);
            if *slot != 0.0 && carried == 0.0 {
                flushed += 1;
            }
            if fresh != 0.0 && added == 0.0 {
                flushed += 1;
            }
            *slot = dtype.round(carried + added);
        }
        self.m = m_new;
        flushed
    }
}

fn validate(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<(usize, usize, usize)> {
    if q.dtype() != k.dtype() || q.dtype() != v.dtype() {
        return Err(Error::Shape(format!(
            "mixed dtypes: q={:?} k={:?} v={:?}",
            q.dtype(),
            k.dtype(),
            v.dtype()
        )));
    }
    let d = q.cols();
    if k.cols() != d || v.cols() != d {
        return Err(Error::Shape(format!(
            "hidden dimension mismatch: q has {d} columns, k has {}, v has {}",
            k.cols(),
            v.cols()
        )));
    }
    if k.rows() != v.rows() {
        return Err(Error::Shape(format!(
            "k has {} rows but v has {}",
            k.rows(),
            v.rows()
        )));
    }
    if k.rows() == 0 {
        return Err(Error::EmptySequence);
    }
    Ok((q.rows(), k.rows(), d))
}

fn score(q_row: &[f32], k_row: &[f32], dtype: Dtype) -> Result<f32> {
    let s = dtype.round(dot_f32(q_row, k_row));
    if !s.is_finite() {
        return Err(Error::NonFinite {
            context: "attention score",
            value: s as f64,
        });
    }
    Ok(s)
}

fn map_rows<F>(q: &Tensor, d: usize, per_row: F) -> Result<(Tensor, u64)>
where
    F: Fn(&[f32]) -> Result<(Vec<f32>, u64)> + Sync,
{
    let rows: Vec<(Vec<f32>, u64)> = (0..q.rows())
        .into_par_iter()
        .map(|r| per_row(q.row(r)))
        .collect::<Result<_>>()?;
    let mut data = Vec::with_capacity(q.rows() * d);
    let mut flushed = 0;
    for (row, count) in rows {
        data.extend_from_slice(&row);
        flushed += count;
    }
    Ok((Tensor::new(q.rows(), d, q.dtype(), data)?, flushed))
}

/// Two-pass attention: score every key and find the maximum, then
/// accumulate the exponentials and the weighted values, dividing by the
/// weight sum once at the end.
pub fn attention_baseline_lazy(q: &Tensor, k: &Tensor, v: &Tensor, exp: ExpMode) -> Result<Tensor> {
    let (_, n, d) = validate(q, k, v)?;
    let dtype = q.dtype();
    let (out, _) = map_rows(q, d, |q_row| {
        let mut scores = Vec::with_capacity(n);
        let mut m = f32::NEG_INFINITY;
        for i in 0..n {
            let s = score(q_row, k.row(i), dtype)?;
            m = max_update(m, s);
            scores.push(s);
        }
        let mut weight_sum = 0.0f32;
        let mut acc = vec![0.0f32; d];
        for (i, &s) in scores.iter().enumerate() {
            let w = eval_exp(s - m, exp, dtype);
            weight_sum = dtype.round(weight_sum + w);
            for (a, &vj) in acc.iter_mut().zip(v.row(i).iter()) {
                *a = dtype.round(*a + w * vj);
            }
        }
        let out: Vec<f32> = acc.iter().map(|&o| dtype.round(o / weight_sum)).collect();
        Ok((out, 0))
    })?;
    Ok(out)
}

/// Single-pass attention with a running maximum: prior partial sums are
/// rescaled whenever the maximum grows, and the softmax division is delayed
/// to the end.
pub fn attention_flash2(q: &Tensor, k: &Tensor, v: &Tensor, exp: ExpMode) -> Result<Tensor> {
    let (_, n, d) = validate(q, k, v)?;
    let dtype = q.dtype();
    let (out, _) = map_rows(q, d, |q_row| {
        let mut m = f32::NEG_INFINITY;
        let mut weight_sum = 0.0f32;
        let mut acc = vec![0.0f32; d];
        for i in 0..n {
            let s = score(q_row, k.row(i), dtype)?;
            let m_new = max_update(m, s);
            let carry = eval_exp(m - m_new, exp, dtype);
            let fresh = eval_exp(s - m_new, exp, dtype);
            weight_sum = dtype.round(weight_sum * carry + fresh);
            for (a, &vj) in acc.iter_mut().zip(v.row(i).iter()) {
                *a = dtype.round(*a * carry + vj * fresh);
            }
            m = m_new;
        }
        let out: Vec<f32> = acc.iter().map(|&o| dtype.round(o / weight_sum)).collect();
        Ok((out, 0))
    })?;
    Ok(out)
}

/// Single-pass attention where both rescale factors are fused exponent
/// decrements on the merged `[l, o]` state.
pub fn attention_flash2_expmul(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<Tensor> {
    attention_flash2_expmul_with_stats(q, k, v).map(|run| run.output)
}

/// As [`attention_flash2_expmul`], also reporting flush-to-zero counts.
pub fn attention_flash2_expmul_with_stats(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<KernelRun> {
    let (_, n, d) = validate(q, k, v)?;
    let dtype = q.dtype();
    let (output, flushed) = map_rows(q, d, |q_row| {
        let mut state = MergedState::new(d);
        let mut flushed = 0;
        for i in 0..n {
            let s = score(q_row, k.row(i), dtype)?;
            flushed += state.update(s, v.row(i), dtype);
        }
        let weight_sum = state.weight_sum();
        let out: Vec<f32> = state.merged()[1..]
            .iter()
            .map(|&o| dtype.round(o / weight_sum))
            .collect();
        Ok((out, flushed))
    })?;
    Ok(KernelRun { output, flushed })
}

/// Run the selected kernel.
pub fn run_kernel(kind: KernelKind, q: &Tensor, k: &Tensor, v: &Tensor) -> Result<KernelRun> {
    match kind {
        KernelKind::BaselineLazy { exp } => Ok(KernelRun {
            output: attention_baseline_lazy(q, k, v, exp)?,
            flushed: 0,
        }),
        KernelKind::Flash2Exact { exp } => Ok(KernelRun {
            output: attention_flash2(q, k, v, exp)?,
            flushed: 0,
        }),
        KernelKind::Flash2ExpMul => attention_flash2_expmul_with_stats(q, k, v),
    }
}

/// The single-pass kernel with every operation lifted to f64 and exact
/// exponentials. Used to check the online rescaling identity against the
/// two-pass reference.
pub fn attention_flash2_f64(q: &Tensor, k: &Tensor, v: &Tensor) -> Result<MatF64> {
    let (n_q, n, d) = validate(q, k, v)?;
    let mut out = MatF64::zeros(n_q, d);
    for r in 0..n_q {
        let q_row = q.row(r);
        let mut m = f64::NEG_INFINITY;
        let mut weight_sum = 0.0f64;
        let mut acc = vec![0.0f64; d];
        for i in 0..n {
            let k_row = k.row(i);
            let s: f64 = q_row
                .iter()
                .zip(k_row.iter())
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            let m_new = m.max(s);
            let carry = (m - m_new).exp();
            let fresh = (s - m_new).exp();
            weight_sum = weight_sum * carry + fresh;
            for (a, &vj) in acc.iter_mut().zip(v.row(i).iter()) {
                *a = *a * carry + vj as f64 * fresh;
            }
            m = m_new;
        }
        for (j, &a) in acc.iter().enumerate() {
            out.data[r * d + j] = a / weight_sum;
        }
    }
    Ok(out)
}
