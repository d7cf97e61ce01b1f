//! Minimal reverse-mode autodiff and the network building blocks used by the
//! controllers: MLP, sinusoidal relative positional encoding, multi-head
//! attention with memory, GRU gating, the gated transformer trunk, diagonal
//! Gaussian policy heads, and Adam.

pub mod adam;
pub mod attention;
pub mod checkpoint;
pub mod gaussian;
pub mod gradcheck;
pub mod gtrxl;
pub mod mlp;
pub mod pe;
pub mod tape;

pub use adam::{AdamConfig, Bindings, Param, ParamStore};
pub use attention::multihead_attention;
pub use gaussian::{
    gaussian_entropy_node, gaussian_kl_node, gaussian_log_prob_node, sample_diag_gaussian,
    GaussianHead,
};
pub use gtrxl::{gru_gate, gtrxl_forward, gtrxl_init, GtrxlConfig, GtrxlMemory};
pub use mlp::{mlp_forward, mlp_init, Activation, MlpConfig};
pub use pe::sinusoidal_relative_pe;
pub use tape::{Grads, NodeId, Tape};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("loss must be a (1,1) scalar, got ({rows},{cols})")]
    NonScalarLoss { rows: usize, cols: usize },
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    ShapeMismatch { what: String, expected: String, got: String },
    #[error("non-finite gradient in parameter '{0}'; update skipped")]
    NonFiniteGradient(String),
    #[error("bad checkpoint: {0}")]
    CheckpointFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
