//! Diagonal Gaussian policy heads: a mean projection plus a learnable
//! state-independent log-std per action dimension.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::nn::adam::{init_linear_scaled, Bindings, ParamStore};
use crate::nn::tape::{NodeId, Tape};

const LN_2PI: f64 = 1.8378770664093453;

/// Names and dimensions of one Gaussian head inside a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GaussianHead {
    pub prefix: String,
    pub action_dim: usize,
}

impl GaussianHead {
    pub fn init(
        store: &mut ParamStore,
        prefix: &str,
        feature_dim: usize,
        action_dim: usize,
        init_std: f64,
        rng: &mut impl Rng,
    ) -> Self {
        store.declare(
            &format!("{prefix}.mean.w"),
            init_linear_scaled(rng, feature_dim, action_dim, 0.01),
        );
        store.declare(&format!("{prefix}.mean.b"), Array2::zeros((1, action_dim)));
        store.declare(
            &format!("{prefix}.log_std"),
            Array2::from_elem((1, action_dim), init_std.ln()),
        );
        GaussianHead { prefix: prefix.to_string(), action_dim }
    }

    pub fn mean_node(
        &self,
        tape: &mut Tape,
        bind: &mut Bindings,
        store: &ParamStore,
        features: NodeId,
    ) -> NodeId {
        let w = bind.node(tape, store, &format!("{}.mean.w", self.prefix));
        let b = bind.node(tape, store, &format!("{}.mean.b", self.prefix));
        let lin = tape.matmul(features, w);
        tape.add_rowvec(lin, b)
    }

    pub fn log_std_node(&self, tape: &mut Tape, bind: &mut Bindings, store: &ParamStore) -> NodeId {
        bind.node(tape, store, &format!("{}.log_std", self.prefix))
    }

    pub fn std(&self, store: &ParamStore) -> Array2<f64> {
        store.get(&format!("{}.log_std", self.prefix)).mapv(f64::exp)
    }
}

/// Per-row log density of `actions` under `N(mean, diag(exp(log_std))^2)`.
/// `mean` is `(B, A)`, `log_std` `(1, A)`, `actions` `(B, A)`; result `(B, 1)`.
pub fn gaussian_log_prob_node(
    tape: &mut Tape,
    mean: NodeId,
    log_std: NodeId,
    actions: NodeId,
) -> NodeId {
    let action_dim = tape.value(mean).ncols();
    let diff = tape.sub(actions, mean);
    let neg_ls = tape.scale(log_std, -1.0);
    let inv_std = tape.exp(neg_ls);
    let z = tape.mul_rowvec(diff, inv_std);
    let z2 = tape.square(z);
    let row_sum = tape.sum_cols(z2);
    let quad = tape.scale(row_sum, -0.5);
    let ls_sum = tape.sum_all(log_std);
    let neg_ls_sum = tape.scale(ls_sum, -1.0);
    let with_ls = tape.add_rowvec(quad, neg_ls_sum);
    tape.add_scalar(with_ls, -0.5 * action_dim as f64 * LN_2PI)
}

/// Closed-form entropy of the head's distribution (scalar node).
pub fn gaussian_entropy_node(tape: &mut Tape, log_std: NodeId) -> NodeId {
    let action_dim = tape.value(log_std).ncols();
    let ls_sum = tape.sum_all(log_std);
    tape.add_scalar(ls_sum, 0.5 * action_dim as f64 * (LN_2PI + 1.0))
}

/// Per-row KL(p || q) between diagonal Gaussians with means `(B, A)` and
/// state-independent log-stds `(1, A)`. Result `(B, 1)`.
pub fn gaussian_kl_node(
    tape: &mut Tape,
    mean_p: NodeId,
    log_std_p: NodeId,
    mean_q: NodeId,
    log_std_q: NodeId,
) -> NodeId {
    let action_dim = tape.value(mean_p).ncols();
    let dls = tape.sub(log_std_q, log_std_p);
    let t1 = tape.sum_all(dls);
    let m2dls = tape.scale(dls, -2.0);
    let e = tape.exp(m2dls);
    let e_sum = tape.sum_all(e);
    let t2 = tape.scale(e_sum, 0.5);
    let diff = tape.sub(mean_p, mean_q);
    let sq = tape.square(diff);
    let m2lsq = tape.scale(log_std_q, -2.0);
    let invq2 = tape.exp(m2lsq);
    let w = tape.mul_rowvec(sq, invq2);
    let w_sum = tape.sum_cols(w);
    let t3 = tape.scale(w_sum, 0.5);
    let t12 = tape.add(t1, t2);
    let with_const = tape.add_rowvec(t3, t12);
    tape.add_scalar(with_const, -0.5 * action_dim as f64)
}

/// Draw `a ~ N(mean, std^2)` elementwise.
pub fn sample_diag_gaussian(
    mean: &[f64],
    std: &[f64],
    rng: &mut impl Rng,
) -> Vec<f64> {
    let unit = Normal::new(0.0, 1.0).unwrap();
    mean.iter().zip(std.iter()).map(|(&m, &s)| m + s * unit.sample(rng)).collect()
}

/// Plain log density, mirroring [`gaussian_log_prob_node`].
pub fn log_prob_plain(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut lp = -0.5 * mean.len() as f64 * LN_2PI;
    for i in 0..mean.len() {
        let z = (action[i] - mean[i]) * (-log_std[i]).exp();
        lp += -0.5 * z * z - log_std[i];
    }
    lp
}

/// Plain closed-form KL(p || q) for diagonal Gaussians.
pub fn kl_plain(mean_p: &[f64], log_std_p: &[f64], mean_q: &[f64], log_std_q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mean_p.len() {
        let dls = log_std_q[i] - log_std_p[i];
        let d = mean_p[i] - mean_q[i];
        kl += dls + 0.5 * (-2.0 * dls).exp() + 0.5 * d * d * (-2.0 * log_std_q[i]).exp() - 0.5;
    }
    kl
}
