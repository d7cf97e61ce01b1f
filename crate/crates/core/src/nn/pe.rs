//! Sinusoidal relative positional embeddings.

use ndarray::Array2;

/// Embedding matrix for relative offsets `0..=max_offset` (row `k` encodes a
/// key sitting `k` steps in the past). Even columns carry `sin`, odd columns
/// `cos`, at geometric frequencies with base 10000.
pub fn sinusoidal_relative_pe(max_offset: usize, embed_dim: usize) -> Array2<f64> {
    assert!(embed_dim % 2 == 0, "embed_dim must be even");
    let mut pe = Array2::zeros((max_offset + 1, embed_dim));
    for k in 0..=max_offset {
        for p in 0..embed_dim / 2 {
            let freq = 1.0 / 10000f64.powf(2.0 * p as f64 / embed_dim as f64);
            pe[(k, 2 * p)] = (k as f64 * freq).sin();
            pe[(k, 2 * p + 1)] = (k as f64 * freq).cos();
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_zero_is_sin_zero_cos_one() {
        let pe = sinusoidal_relative_pe(10, 8);
        for p in 0..4 {
            assert_eq!(pe[(0, 2 * p)], 0.0);
            assert_eq!(pe[(0, 2 * p + 1)], 1.0);
        }
    }

    #[test]
    fn entries_bounded() {
        let pe = sinusoidal_relative_pe(64, 32);
        for &x in pe.iter() {
            assert!((-1.0..=1.0).contains(&x));
        }
    }

    #[test]
    fn period_ratio_across_dimension_pairs() {
        let d = 16;
        let pe = sinusoidal_relative_pe(0, d);
        let _ = pe;
        // period(pair p) = 2*pi / freq(p); ratio between consecutive pairs
        // is 10000^(2/d) by construction.
        let freq = |p: usize| 1.0 / 10000f64.powf(2.0 * p as f64 / d as f64);
        let expect = 10000f64.powf(2.0 / d as f64);
        for p in 0..d / 2 - 1 {
            let ratio = freq(p) / freq(p + 1);
            assert!((ratio - expect).abs() < 1e-12);
        }
    }
}
