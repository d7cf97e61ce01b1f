//! Plain feed-forward stacks: affine layers with an activation between
//! them and a final affine output.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::adam::{init_linear, Bindings, ParamStore};
use crate::nn::tape::{NodeId, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Elu,
    Tanh,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
}

impl MlpConfig {
    /// Three hidden layers of 512/256/128, ELU.
    pub fn standard(input_dim: usize, output_dim: usize) -> Self {
        MlpConfig { input_dim, hidden_dims: vec![512, 256, 128], output_dim, activation: Activation::Elu }
    }

    pub fn with_hidden(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        MlpConfig { input_dim, hidden_dims, output_dim, activation: Activation::Elu }
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((prev, h));
            prev = h;
        }
        dims.push((prev, self.output_dim));
        dims
    }
}

pub fn mlp_init(store: &mut ParamStore, prefix: &str, cfg: &MlpConfig, rng: &mut impl Rng) {
    for (i, (fan_in, fan_out)) in cfg.layer_dims().into_iter().enumerate() {
        store.declare(&format!("{prefix}.l{i}.w"), init_linear(rng, fan_in, fan_out));
        store.declare(&format!("{prefix}.l{i}.b"), Array2::zeros((1, fan_out)));
    }
}

/// Affine–activation stack; the final layer is affine with no activation.
pub fn mlp_forward(
    tape: &mut Tape,
    bind: &mut Bindings,
    store: &ParamStore,
    prefix: &str,
    cfg: &MlpConfig,
    input: NodeId,
) -> NodeId {
    assert_eq!(
        tape.value(input).ncols(),
        cfg.input_dim,
        "mlp '{prefix}': input dim mismatch"
    );
    let n_layers = cfg.hidden_dims.len() + 1;
    let mut h = input;
    for i in 0..n_layers {
        let w = bind.node(tape, store, &format!("{prefix}.l{i}.w"));
        let b = bind.node(tape, store, &format!("{prefix}.l{i}.b"));
        let lin = tape.matmul(h, w);
        h = tape.add_rowvec(lin, b);
        if i + 1 < n_layers {
            h = match cfg.activation {
                Activation::Elu => tape.elu(h),
                Activation::Tanh => tape.tanh(h),
            };
        }
    }
    h
}
