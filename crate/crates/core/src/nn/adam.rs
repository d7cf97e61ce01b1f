//! Named parameter storage with gradient accumulators and Adam state.

use indexmap::IndexMap;
use ndarray::Array2;
use rand::Rng;

use crate::nn::tape::{Grads, NodeId, Tape};
use crate::nn::NnError;

/// One parameter tensor with its gradient and Adam moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    pub m: Array2<f64>,
    pub v: Array2<f64>,
}

impl Param {
    fn new(value: Array2<f64>) -> Self {
        let dim = value.dim();
        Param { value, grad: Array2::zeros(dim), m: Array2::zeros(dim), v: Array2::zeros(dim) }
    }
}

/// Insertion-ordered collection of named parameters plus a shared Adam
/// step counter. Ordering is deterministic, which keeps checkpoints and
/// gradient-norm reductions reproducible.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: IndexMap<String, Param>,
    pub step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare(&mut self, name: &str, value: Array2<f64>) {
        let prev = self.entries.insert(name.to_string(), Param::new(value));
        assert!(prev.is_none(), "parameter '{name}' declared twice");
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn get(&self, name: &str) -> &Array2<f64> {
        &self.entries.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'")).value
    }

    pub fn get_param(&self, name: &str) -> &Param {
        self.entries.get(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Param {
        self.entries.get_mut(name).unwrap_or_else(|| panic!("unknown parameter '{name}'"))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.entries.values_mut() {
            p.grad.fill(0.0);
        }
    }

    /// Copy values (not moments) from another store with identical layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) {
        for (name, p) in other.entries.iter() {
            let mine = self.entries.get_mut(name).unwrap_or_else(|| {
                panic!("copy_values_from: parameter '{name}' missing in target")
            });
            assert_eq!(mine.value.dim(), p.value.dim());
            mine.value.assign(&p.value);
        }
    }

    pub fn grad_global_norm(&self) -> f64 {
        self.entries
            .values()
            .map(|p| p.grad.iter().map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Global gradient-norm clip followed by a bias-corrected Adam update.
    /// Gradients are zeroed afterwards. A non-finite gradient anywhere
    /// skips the whole update and reports the offending parameter.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<(), NnError> {
        for (name, p) in self.entries.iter() {
            if !p.grad.iter().all(|g| g.is_finite()) {
                let name = name.clone();
                self.zero_grads();
                return Err(NnError::NonFiniteGradient(name));
            }
        }
        let norm = self.grad_global_norm();
        let clip_scale =
            if norm > cfg.max_grad_norm { cfg.max_grad_norm / norm } else { 1.0 };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - cfg.beta1.powi(t);
        let bc2 = 1.0 - cfg.beta2.powi(t);
        for p in self.entries.values_mut() {
            ndarray::Zip::from(&mut p.m)
                .and(&p.grad)
                .for_each(|m, &g| *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g * clip_scale);
            ndarray::Zip::from(&mut p.v).and(&p.grad).for_each(|v, &g| {
                let gc = g * clip_scale;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gc * gc
            });
            ndarray::Zip::from(&mut p.value).and(&p.m).and(&p.v).for_each(|w, &m, &v| {
                let mhat = m / bc1;
                let vhat = v / bc2;
                *w -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            });
            p.grad.fill(0.0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub max_grad_norm: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, max_grad_norm: 1.0 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

/// Maps parameter names to tape leaves, one leaf per name, so that
/// gradients from every use of a parameter accumulate on a single node.
#[derive(Default)]
pub struct Bindings {
    by_name: IndexMap<String, NodeId>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-bind a name to an existing node (gradient-check harnesses use
    /// this to route parameters through externally created leaves).
    pub fn preset(&mut self, name: &str, id: NodeId) {
        self.by_name.insert(name.to_string(), id);
    }

    pub fn node(&mut self, tape: &mut Tape, store: &ParamStore, name: &str) -> NodeId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = tape.leaf(store.get(name).clone());
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Add the tape gradients of every bound parameter into the store.
    pub fn accumulate(&self, grads: &Grads, store: &mut ParamStore) {
        for (name, &id) in self.by_name.iter() {
            if let Some(g) = grads.get_ref(id) {
                let p = store.get_mut(name);
                p.grad += g;
            }
        }
    }
}

/// Uniform init in `[-s, s]` with `s = sqrt(1/fan_in)`.
pub fn init_linear(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let s = (1.0 / fan_in as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-s..s))
}

/// Same as [`init_linear`] scaled down, for output heads that should start
/// near zero.
pub fn init_linear_scaled(
    rng: &mut impl Rng,
    fan_in: usize,
    fan_out: usize,
    scale: f64,
) -> Array2<f64> {
    init_linear(rng, fan_in, fan_out) * scale
}
