//! Shared instance construction for the kernel benchmarks.

use expmul_cli::generate::{generate, GenSpec};
use expmul_core::{Dtype, Tensor};

/// A nominal benchmark instance at hidden dimension `d`.
pub fn instance(d: usize, seqlen: usize, queries: usize) -> (Tensor, Tensor, Tensor) {
    generate(&GenSpec {
        dtype: Dtype::Fp32,
        dim: d,
        seqlen,
        queries,
        seed: 42,
        stress: false,
    })
}
