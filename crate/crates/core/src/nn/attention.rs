//! Multi-head scaled dot-product attention with relative positional scores
//! and causal masking over a memory-extended key sequence.

use ndarray::Array2;
use rand::Rng;

use crate::nn::adam::{init_linear, Bindings, ParamStore};
use crate::nn::tape::{NodeId, Tape};

pub fn attention_init(store: &mut ParamStore, prefix: &str, embed_dim: usize, rng: &mut impl Rng) {
    for name in ["wq", "wk", "wv", "wo", "wr"] {
        store.declare(&format!("{prefix}.{name}"), init_linear(rng, embed_dim, embed_dim));
    }
    // Content and position biases of the relative-attention score.
    store.declare(&format!("{prefix}.u"), Array2::zeros((1, embed_dim)));
    store.declare(&format!("{prefix}.v"), Array2::zeros((1, embed_dim)));
}

/// Relative multi-head attention.
///
/// `queries` is the normalized current segment `(T, E)`; `keys_values` spans
/// memory plus segment `(S, E)` with `S = mem_rows + T`. `pe` holds relative
/// offset embeddings for offsets `0..=window` (so `window + 1` rows); a query
/// may attend to itself and at most `window` steps into the past, never to
/// future positions.
pub fn multihead_attention(
    tape: &mut Tape,
    bind: &mut Bindings,
    store: &ParamStore,
    prefix: &str,
    queries: NodeId,
    keys_values: NodeId,
    pe: &Array2<f64>,
    num_heads: usize,
    mem_rows: usize,
) -> NodeId {
    let (t, embed) = tape.value(queries).dim();
    let (s, embed_kv) = tape.value(keys_values).dim();
    assert_eq!(embed, embed_kv);
    assert_eq!(s, mem_rows + t, "keys_values must span memory + segment");
    assert!(embed % num_heads == 0, "embed_dim must divide num_heads");
    let d = embed / num_heads;
    let window = pe.nrows() - 1;

    let wq = bind.node(tape, store, &format!("{prefix}.wq"));
    let wk = bind.node(tape, store, &format!("{prefix}.wk"));
    let wv = bind.node(tape, store, &format!("{prefix}.wv"));
    let wo = bind.node(tape, store, &format!("{prefix}.wo"));
    let wr = bind.node(tape, store, &format!("{prefix}.wr"));
    let u = bind.node(tape, store, &format!("{prefix}.u"));
    let v = bind.node(tape, store, &format!("{prefix}.v"));

    let q_full = tape.matmul(queries, wq);
    let k_full = tape.matmul(keys_values, wk);
    let v_full = tape.matmul(keys_values, wv);
    let pe_node = tape.constant(pe.clone());
    let r_full = tape.matmul(pe_node, wr);

    // Additive mask: allow offsets 0..=window into the past.
    let mut mask = Array2::zeros((t, s));
    for i in 0..t {
        for j in 0..s {
            let pos = mem_rows + i;
            let visible = pos >= j && pos - j <= window;
            if !visible {
                mask[(i, j)] = -1e30;
            }
        }
    }
    let mask_node = tape.constant(mask);

    let mut head_outputs = Vec::with_capacity(num_heads);
    for h in 0..num_heads {
        let start = h * d;
        let q_h = tape.slice_cols(q_full, start, d);
        let k_h = tape.slice_cols(k_full, start, d);
        let v_h = tape.slice_cols(v_full, start, d);
        let r_h = tape.slice_cols(r_full, start, d);
        let u_h = tape.slice_cols(u, start, d);
        let v_bias_h = tape.slice_cols(v, start, d);

        let q_u = tape.add_rowvec(q_h, u_h);
        let k_t = tape.transpose(k_h);
        let content = tape.matmul(q_u, k_t);

        let q_v = tape.add_rowvec(q_h, v_bias_h);
        let r_t = tape.transpose(r_h);
        let rel_scores = tape.matmul(q_v, r_t);
        let position = tape.rel_shift(rel_scores, mem_rows, s);

        let raw = tape.add(content, position);
        let scaled = tape.scale(raw, 1.0 / (d as f64).sqrt());
        let masked = tape.add(scaled, mask_node);
        let attn = tape.row_softmax(masked);
        head_outputs.push(tape.matmul(attn, v_h));
    }
    let concat = tape.concat_cols(&head_outputs);
    tape.matmul(concat, wo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::pe::sinusoidal_relative_pe;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(embed: usize, seed: u64) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        attention_init(&mut store, "a", embed, &mut rng);
        store
    }

    #[test]
    fn single_position_single_head_passes_value_through() {
        let embed = 4;
        let mut store = setup(embed, 1);
        store.get_mut("a.wv").value.assign(&Array2::eye(embed));
        store.get_mut("a.wo").value.assign(&Array2::eye(embed));
        let mut tape = Tape::new(false);
        let mut bind = Bindings::new();
        let x = Array2::from_shape_fn((1, embed), |(_, j)| 0.3 * j as f64 - 0.2);
        let q = tape.constant(x.clone());
        let kv = tape.constant(x.clone());
        let pe = sinusoidal_relative_pe(3, embed);
        let out = multihead_attention(&mut tape, &mut bind, &store, "a", q, kv, &pe, 1, 0);
        // Softmax over one visible item is 1, so the output is Wo(Wv(x)) = x.
        for j in 0..embed {
            assert!((tape.value(out)[(0, j)] - x[(0, j)]).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_scores_average_values() {
        let embed = 4;
        let mut store = setup(embed, 2);
        // Zero query/position paths give uniform scores over visible items.
        store.get_mut("a.wq").value.fill(0.0);
        store.get_mut("a.wr").value.fill(0.0);
        store.get_mut("a.wv").value.assign(&Array2::eye(embed));
        store.get_mut("a.wo").value.assign(&Array2::eye(embed));
        let v1 = [1.0, 2.0, 3.0, 4.0];
        let v2 = [-1.0, 0.5, 2.0, -3.0];
        let mut kv = Array2::zeros((2, embed));
        for j in 0..embed {
            kv[(0, j)] = v1[j];
            kv[(1, j)] = v2[j];
        }
        let mut tape = Tape::new(false);
        let mut bind = Bindings::new();
        let q = tape.constant(kv.row(1).insert_axis(ndarray::Axis(0)).to_owned());
        let kv_id = tape.constant(kv.clone());
        let pe = sinusoidal_relative_pe(3, embed);
        let out = multihead_attention(&mut tape, &mut bind, &store, "a", q, kv_id, &pe, 1, 1);
        for j in 0..embed {
            assert!((tape.value(out)[(0, j)] - 0.5 * (v1[j] + v2[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn causal_mask_isolates_earlier_outputs() {
        let embed = 6;
        let store = setup(embed, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let base = Array2::from_shape_fn((4, embed), |_| {
            rand::Rng::gen_range(&mut rng, -1.0..1.0)
        });
        let mut changed = base.clone();
        for j in 0..embed {
            changed[(3, j)] += 0.5;
        }
        let pe = sinusoidal_relative_pe(5, embed);
        let run = |x: &Array2<f64>| {
            let mut tape = Tape::new(false);
            let mut bind = Bindings::new();
            let q = tape.constant(x.clone());
            let kv = tape.constant(x.clone());
            let out = multihead_attention(&mut tape, &mut bind, &store, "a", q, kv, &pe, 2, 0);
            tape.value(out).clone()
        };
        let out_a = run(&base);
        let out_b = run(&changed);
        for i in 0..3 {
            for j in 0..embed {
                assert_eq!(out_a[(i, j)], out_b[(i, j)], "row {i} leaked future info");
            }
        }
    }
}
