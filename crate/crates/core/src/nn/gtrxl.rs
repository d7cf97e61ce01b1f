//! Gated transformer trunk with a fixed-length activation memory carried
//! across segments. Residual connections are replaced by GRU-style gates.

use ndarray::{s, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::adam::{init_linear, Bindings, ParamStore};
use crate::nn::attention::{attention_init, multihead_attention};
use crate::nn::pe::sinusoidal_relative_pe;
use crate::nn::tape::{NodeId, Tape};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GtrxlConfig {
    pub num_blocks: usize,
    pub num_heads: usize,
    pub gru_bias: f64,
    /// Inner width of the feed-forward sublayer.
    pub hidden_size: usize,
    pub embed_dim: usize,
    pub memory_length: usize,
}

impl Default for GtrxlConfig {
    fn default() -> Self {
        GtrxlConfig {
            num_blocks: 2,
            num_heads: 6,
            gru_bias: 0.0,
            hidden_size: 128,
            embed_dim: 384,
            memory_length: 15,
        }
    }
}

impl GtrxlConfig {
    pub fn validate(&self) {
        assert!(self.embed_dim % self.num_heads == 0, "embed_dim must divide num_heads");
        assert!(self.memory_length >= 1, "memory_length must be >= 1");
        assert!(self.num_blocks >= 1);
    }
}

/// Per-block activation memory: the most recent block-input rows, detached
/// from any gradient flow. Empty at episode start.
#[derive(Debug, Clone)]
pub struct GtrxlMemory {
    pub blocks: Vec<Array2<f64>>,
}

impl GtrxlMemory {
    pub fn empty(cfg: &GtrxlConfig) -> Self {
        GtrxlMemory { blocks: vec![Array2::zeros((0, cfg.embed_dim)); cfg.num_blocks] }
    }

    pub fn rows(&self) -> usize {
        self.blocks.first().map(|b| b.nrows()).unwrap_or(0)
    }
}

fn gate_init(store: &mut ParamStore, prefix: &str, embed_dim: usize, rng: &mut impl Rng) {
    for name in ["wr", "ur", "wz", "uz", "wg", "ug"] {
        store.declare(&format!("{prefix}.{name}"), init_linear(rng, embed_dim, embed_dim));
    }
}

/// GRU-style gate merging a stream `x` (treated as the hidden state) with an
/// update `y` (treated as the input):
///
/// r = sigma(y Wr + x Ur); z = sigma(y Wz + x Uz - gru_bias);
/// h = tanh(y Wg + (r .* x) Ug); out = (1 - z) .* x + z .* h
///
/// Larger `gru_bias` shifts z toward 0, biasing the gate toward passing `x`
/// through unchanged.
pub fn gru_gate(
    tape: &mut Tape,
    bind: &mut Bindings,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
    y: NodeId,
    gru_bias: f64,
) -> NodeId {
    let wr = bind.node(tape, store, &format!("{prefix}.wr"));
    let ur = bind.node(tape, store, &format!("{prefix}.ur"));
    let wz = bind.node(tape, store, &format!("{prefix}.wz"));
    let uz = bind.node(tape, store, &format!("{prefix}.uz"));
    let wg = bind.node(tape, store, &format!("{prefix}.wg"));
    let ug = bind.node(tape, store, &format!("{prefix}.ug"));

    let ywr = tape.matmul(y, wr);
    let xur = tape.matmul(x, ur);
    let r_pre = tape.add(ywr, xur);
    let r = tape.sigmoid(r_pre);

    let ywz = tape.matmul(y, wz);
    let xuz = tape.matmul(x, uz);
    let z_sum = tape.add(ywz, xuz);
    let z_pre = tape.add_scalar(z_sum, -gru_bias);
    let z = tape.sigmoid(z_pre);

    let rx = tape.mul(r, x);
    let ywg = tape.matmul(y, wg);
    let rxug = tape.matmul(rx, ug);
    let h_pre = tape.add(ywg, rxug);
    let h = tape.tanh(h_pre);

    // out = x + z .* (h - x)
    let h_minus_x = tape.sub(h, x);
    let gated = tape.mul(z, h_minus_x);
    tape.add(x, gated)
}

fn layer_norm_affine(
    tape: &mut Tape,
    bind: &mut Bindings,
    store: &ParamStore,
    prefix: &str,
    x: NodeId,
) -> NodeId {
    let normed = tape.layer_norm_row(x, 1e-5);
    let gain = bind.node(tape, store, &format!("{prefix}.g"));
    let bias = bind.node(tape, store, &format!("{prefix}.b"));
    let scaled = tape.mul_rowvec(normed, gain);
    tape.add_rowvec(scaled, bias)
}

pub fn gtrxl_init(store: &mut ParamStore, prefix: &str, cfg: &GtrxlConfig, rng: &mut impl Rng) {
    cfg.validate();
    let e = cfg.embed_dim;
    for b in 0..cfg.num_blocks {
        let bp = format!("{prefix}.block{b}");
        store.declare(&format!("{bp}.ln1.g"), Array2::ones((1, e)));
        store.declare(&format!("{bp}.ln1.b"), Array2::zeros((1, e)));
        attention_init(store, &format!("{bp}.attn"), e, rng);
        gate_init(store, &format!("{bp}.gate1"), e, rng);
        store.declare(&format!("{bp}.ln2.g"), Array2::ones((1, e)));
        store.declare(&format!("{bp}.ln2.b"), Array2::zeros((1, e)));
        store.declare(&format!("{bp}.ffn.w1"), init_linear(rng, e, cfg.hidden_size));
        store.declare(&format!("{bp}.ffn.b1"), Array2::zeros((1, cfg.hidden_size)));
        store.declare(&format!("{bp}.ffn.w2"), init_linear(rng, cfg.hidden_size, e));
        store.declare(&format!("{bp}.ffn.b2"), Array2::zeros((1, e)));
        gate_init(store, &format!("{bp}.gate2"), e, rng);
    }
}

/// Run one segment of embedded inputs `(T, embed_dim)` through the gated
/// transformer stack, attending over `memory` plus the segment itself.
///
/// Returns the output node and the successor memory (the last
/// `memory_length` un-normalized block inputs per block, detached).
pub fn gtrxl_forward(
    tape: &mut Tape,
    bind: &mut Bindings,
    store: &ParamStore,
    prefix: &str,
    cfg: &GtrxlConfig,
    segment: NodeId,
    memory: &GtrxlMemory,
) -> (NodeId, GtrxlMemory) {
    cfg.validate();
    assert_eq!(tape.value(segment).ncols(), cfg.embed_dim, "segment embed dim mismatch");
    assert_eq!(memory.blocks.len(), cfg.num_blocks, "memory block count mismatch");
    let pe = sinusoidal_relative_pe(cfg.memory_length, cfg.embed_dim);

    let mut x = segment;
    let mut new_memory = Vec::with_capacity(cfg.num_blocks);
    for b in 0..cfg.num_blocks {
        let bp = format!("{prefix}.block{b}");
        let mem = &memory.blocks[b];
        let mem_rows = mem.nrows();
        assert_eq!(mem.ncols(), cfg.embed_dim, "memory embed dim mismatch");
        assert!(mem_rows <= cfg.memory_length, "memory longer than memory_length");

        // Successor memory: last memory_length rows of [mem; x], detached.
        let x_val = tape.value(x).clone();
        let total = mem_rows + x_val.nrows();
        let keep = total.min(cfg.memory_length);
        let mut next_mem = Array2::zeros((keep, cfg.embed_dim));
        for r in 0..keep {
            let src = total - keep + r;
            if src < mem_rows {
                next_mem.row_mut(r).assign(&mem.row(src));
            } else {
                next_mem.row_mut(r).assign(&x_val.row(src - mem_rows));
            }
        }
        new_memory.push(next_mem);

        let queries = layer_norm_affine(tape, bind, store, &format!("{bp}.ln1"), x);
        let kv_input = if mem_rows > 0 {
            let mem_node = tape.constant(mem.clone());
            tape.concat_rows(&[mem_node, x])
        } else {
            x
        };
        let keys_values = layer_norm_affine(tape, bind, store, &format!("{bp}.ln1"), kv_input);
        let attn_out = multihead_attention(
            tape,
            bind,
            store,
            &format!("{bp}.attn"),
            queries,
            keys_values,
            &pe,
            cfg.num_heads,
            mem_rows,
        );
        let h1 = gru_gate(tape, bind, store, &format!("{bp}.gate1"), x, attn_out, cfg.gru_bias);

        let h1n = layer_norm_affine(tape, bind, store, &format!("{bp}.ln2"), h1);
        let w1 = bind.node(tape, store, &format!("{bp}.ffn.w1"));
        let b1 = bind.node(tape, store, &format!("{bp}.ffn.b1"));
        let w2 = bind.node(tape, store, &format!("{bp}.ffn.w2"));
        let b2 = bind.node(tape, store, &format!("{bp}.ffn.b2"));
        let f1 = tape.matmul(h1n, w1);
        let f1b = tape.add_rowvec(f1, b1);
        let f1a = tape.elu(f1b);
        let f2 = tape.matmul(f1a, w2);
        let ffn_out = tape.add_rowvec(f2, b2);

        x = gru_gate(tape, bind, store, &format!("{bp}.gate2"), h1, ffn_out, cfg.gru_bias);
    }
    (x, GtrxlMemory { blocks: new_memory })
}

/// Trim a memory to its last `len` rows (used when replaying stored memories).
pub fn trim_memory(mem: &GtrxlMemory, len: usize) -> GtrxlMemory {
    let blocks = mem
        .blocks
        .iter()
        .map(|b| {
            let rows = b.nrows();
            let keep = rows.min(len);
            b.slice(s![rows - keep.., ..]).to_owned()
        })
        .collect();
    GtrxlMemory { blocks }
}
