//! Deterministic test-tensor generation.
//!
//! The generator is ChaCha8 seeded from the user seed; floats are built from
//! raw `next_u32` draws (top 24 bits scaled to `[0, 1)`), so the output
//! bytes depend only on the seed and the configuration, not on any float
//! sampling library. Tensors are filled in the order Q, then K, then V,
//! row-major.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use expmul_core::{Dtype, Tensor};

/// What to generate.
#[derive(Clone, Copy, Debug)]
pub struct GenSpec {
    pub dtype: Dtype,
    pub dim: usize,
    pub seqlen: usize,
    pub queries: usize,
    pub seed: u64,
    /// Widen the distributions to force score clipping and flush-to-zero
    /// paths instead of staying in the nominal accuracy regime.
    pub stress: bool,
}

fn unit(rng: &mut ChaCha8Rng) -> f32 {
    (rng.next_u32() >> 8) as f32 * (1.0 / (1 << 24) as f32)
}

fn symmetric(rng: &mut ChaCha8Rng) -> f32 {
    2.0 * unit(rng) - 1.0
}

/// Produce the Q, K, V tensors for `spec`.
///
/// Nominal mode draws uniformly from `[-1, 1)` and scales Q and K by
/// `min(1, sqrt(30/d))` so every score magnitude stays at or below 30.
/// Stress mode scales Q and K by 100 so score gaps blow past the clip knee,
/// and spreads V magnitudes over `2^-120..2` so deep decrements flush.
pub fn generate(spec: &GenSpec) -> (Tensor, Tensor, Tensor) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let qk_scale = if spec.stress {
        100.0
    } else {
        (30.0f32 / spec.dim as f32).sqrt().min(1.0)
    };

    let mut fill_qk = |rows: usize| -> Vec<f32> {
        (0..rows * spec.dim)
            .map(|_| qk_scale * symmetric(&mut rng))
            .collect()
    };
    let q_data = fill_qk(spec.queries);
    let k_data = fill_qk(spec.seqlen);

    let v_data: Vec<f32> = (0..spec.seqlen * spec.dim)
        .map(|_| {
            if spec.stress {
                let sign = if rng.next_u32() & 1 == 1 {
                    -1.0f32
                } else {
                    1.0
                };
                let mantissa = 1.0 + unit(&mut rng);
                let exponent = -((rng.next_u32() % 121) as i32);
                sign * mantissa * 2.0f32.powi(exponent)
            } else {
                symmetric(&mut rng)
            }
        })
        .collect();

    let q = Tensor::from_f32(spec.queries, spec.dim, spec.dtype, q_data)
        .expect("generated values are bounded");
    let k = Tensor::from_f32(spec.seqlen, spec.dim, spec.dtype, k_data)
        .expect("generated values are bounded");
    let v = Tensor::from_f32(spec.seqlen, spec.dim, spec.dtype, v_data)
        .expect("generated values are bounded");
    (q, k, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GenSpec {
        GenSpec {
            dtype: Dtype::Fp32,
            dim: 16,
            seqlen: 64,
            queries: 8,
            seed: 1,
            stress: false,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let (q1, k1, v1) = generate(&spec());
        let (q2, k2, v2) = generate(&spec());
        assert_eq!(q1, q2);
        assert_eq!(k1, k2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn different_seeds_differ() {
        let (q1, _, _) = generate(&spec());
        let (q2, _, _) = generate(&GenSpec { seed: 2, ..spec() });
        assert_ne!(q1, q2);
    }

    #[test]
    fn shapes_match_spec() {
        let (q, k, v) = generate(&spec());
        assert_eq!((q.rows(), q.cols()), (8, 16));
        assert_eq!((k.rows(), k.cols()), (64, 16));
        assert_eq!((v.rows(), v.cols()), (64, 16));
    }

    #[test]
    fn nominal_scores_stay_below_clip_scale() {
        for d in [4usize, 16, 64, 256] {
            let (q, k, _) = generate(&GenSpec { dim: d, ..spec() });
            for r in 0..q.rows() {
                for i in 0..k.rows() {
                    let s: f32 = q.row(r).iter().zip(k.row(i)).map(|(a, b)| a * b).sum();
                    assert!(s.abs() <= 30.0, "score {s} at d={d}");
                }
            }
        }
    }

    #[test]
    fn bf16_values_are_representable() {
        let (q, _, v) = generate(&GenSpec {
            dtype: Dtype::Bf16,
            stress: true,
            ..spec()
        });
        for &x in q.data().iter().chain(v.data()) {
            assert_eq!(x.to_bits() & 0xFFFF, 0);
        }
    }
}
