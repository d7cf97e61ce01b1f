//! Behavioral contracts of the network stack: segment/streaming equivalence
//! of the gated transformer, gate saturation, Adam update laws, policy-head
//! closed forms, detached memory, checkpoint round-trips, and seeded
//! reproducibility.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wbc_core::nn::adam::{AdamConfig, Bindings, ParamStore};
use wbc_core::nn::checkpoint::{load_checkpoint, save_checkpoint};
use wbc_core::nn::gaussian::kl_plain;
use wbc_core::nn::gtrxl::{gtrxl_forward, gtrxl_init, GtrxlConfig, GtrxlMemory};
use wbc_core::nn::mlp::{mlp_forward, mlp_init, MlpConfig};
use wbc_core::nn::Tape;

fn rand_arr(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((m, n), |_| rng.gen_range(-scale..scale))
}

/// Full-sequence forward with empty memory must equal processing the same
/// tokens one at a time while carrying memory.
pub fn streaming_matches_full(cfg: &GtrxlConfig, t_len: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    gtrxl_init(&mut store, "g", cfg, &mut rng);
    let seg = rand_arr(&mut rng, t_len, cfg.embed_dim, 1.0);

    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let seg_id = tape.constant(seg.clone());
    let (full_out, _) =
        gtrxl_forward(&mut tape, &mut bind, &store, "g", cfg, seg_id, &GtrxlMemory::empty(cfg));
    let full = tape.value(full_out).clone();

    let mut memory = GtrxlMemory::empty(cfg);
    let mut max_diff = 0.0f64;
    for i in 0..t_len {
        let mut t = Tape::new(false);
        let mut b = Bindings::new();
        let row = seg.row(i).insert_axis(ndarray::Axis(0)).to_owned();
        let row_id = t.constant(row);
        let (out, next_mem) = gtrxl_forward(&mut t, &mut b, &store, "g", cfg, row_id, &memory);
        memory = next_mem;
        let out_v = t.value(out);
        for j in 0..cfg.embed_dim {
            max_diff = max_diff.max((out_v[(0, j)] - full[(i, j)]).abs());
        }
    }
    max_diff
}

#[test]
fn gtrxl_streaming_equivalence() {
    let cfg = GtrxlConfig {
        num_blocks: 2,
        num_heads: 2,
        gru_bias: 0.0,
        hidden_size: 8,
        embed_dim: 10,
        memory_length: 5,
    };
    for seed in 0..5 {
        let diff = streaming_matches_full(&cfg, 12, seed);
        assert!(diff < 1e-6, "seed {seed}: streaming vs full diff {diff}");
    }
}

#[test]
fn gtrxl_large_gru_bias_is_near_identity() {
    let cfg = GtrxlConfig {
        num_blocks: 2,
        num_heads: 2,
        gru_bias: 20.0,
        hidden_size: 8,
        embed_dim: 12,
        memory_length: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    gtrxl_init(&mut store, "g", &cfg, &mut rng);
    let seg = rand_arr(&mut rng, 6, cfg.embed_dim, 1.0);
    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let seg_id = tape.constant(seg.clone());
    let (out, _) =
        gtrxl_forward(&mut tape, &mut bind, &store, "g", &cfg, seg_id, &GtrxlMemory::empty(&cfg));
    let out_v = tape.value(out);
    let diff = (out_v - &seg).mapv(|x| x * x).sum().sqrt();
    let norm = seg.mapv(|x| x * x).sum().sqrt();
    assert!(diff / norm < 1e-3, "relative deviation from identity: {}", diff / norm);
}

#[test]
fn gtrxl_single_token_no_memory_runs() {
    let cfg = GtrxlConfig {
        num_blocks: 1,
        num_heads: 2,
        gru_bias: 0.0,
        hidden_size: 6,
        embed_dim: 8,
        memory_length: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut store = ParamStore::new();
    gtrxl_init(&mut store, "g", &cfg, &mut rng);
    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let seg = tape.constant(rand_arr(&mut rng, 1, 8, 1.0));
    let (out, mem) =
        gtrxl_forward(&mut tape, &mut bind, &store, "g", &cfg, seg, &GtrxlMemory::empty(&cfg));
    assert_eq!(tape.value(out).dim(), (1, 8));
    assert_eq!(mem.blocks[0].nrows(), 1);
}

#[test]
fn gtrxl_default_config_output_shape() {
    let cfg = GtrxlConfig::default();
    assert_eq!(cfg.num_blocks, 2);
    assert_eq!(cfg.num_heads, 6);
    assert_eq!(cfg.embed_dim, 384);
    assert_eq!(cfg.memory_length, 15);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    gtrxl_init(&mut store, "g", &cfg, &mut rng);
    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let seg = tape.constant(rand_arr(&mut rng, 4, cfg.embed_dim, 1.0));
    let (out, _) =
        gtrxl_forward(&mut tape, &mut bind, &store, "g", &cfg, seg, &GtrxlMemory::empty(&cfg));
    assert_eq!(tape.value(out).dim(), (4, cfg.embed_dim));
}

/// Gradients must not flow into memory from a previous segment: with both
/// segments on one tape, the first segment's input receives no gradient
/// from a loss on the second segment.
#[test]
fn gtrxl_memory_is_detached() {
    let cfg = GtrxlConfig {
        num_blocks: 1,
        num_heads: 2,
        gru_bias: 0.0,
        hidden_size: 6,
        embed_dim: 8,
        memory_length: 4,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    gtrxl_init(&mut store, "g", &cfg, &mut rng);

    let mut tape = Tape::new(true);
    let mut bind = Bindings::new();
    let seg1 = tape.leaf(rand_arr(&mut rng, 3, 8, 1.0));
    let (_, mem) =
        gtrxl_forward(&mut tape, &mut bind, &store, "g", &cfg, seg1, &GtrxlMemory::empty(&cfg));
    let seg2 = tape.leaf(rand_arr(&mut rng, 3, 8, 1.0));
    let (out2, _) = gtrxl_forward(&mut tape, &mut bind, &store, "g", &cfg, seg2, &mem);
    let loss = tape.sum_all(out2);
    let sq = tape.square(loss);
    let grads = tape.backward(sq).unwrap();
    assert!(grads.get_ref(seg1).is_none(), "gradient leaked through detached memory");
    assert!(grads.get_ref(seg2).is_some());
}

#[test]
fn adam_first_step_magnitude_is_lr() {
    let mut store = ParamStore::new();
    store.declare("w", Array2::from_elem((2, 3), 1.0));
    // Constant gradient, norm below the clip threshold.
    let g = Array2::from_elem((2, 3), 0.1);
    store.get_mut("w").grad.assign(&g);
    let cfg = AdamConfig { lr: 1e-3, max_grad_norm: 1e9, ..Default::default() };
    store.adam_step(&cfg).unwrap();
    let w = store.get("w");
    for &x in w.iter() {
        // First-step bias-corrected update is lr * sign(g) up to eps.
        assert!((x - (1.0 - 1e-3)).abs() < 1e-6, "got {x}");
    }
    assert_eq!(store.step, 1);
}

#[test]
fn adam_clips_global_gradient_norm() {
    let mut store = ParamStore::new();
    store.declare("w", Array2::from_elem((1, 100), 0.0));
    store.get_mut("w").grad.fill(1.0); // norm 10
    let cfg = AdamConfig { lr: 1e-4, max_grad_norm: 1.0, ..Default::default() };
    assert!((store.grad_global_norm() - 10.0).abs() < 1e-12);
    store.adam_step(&cfg).unwrap();
    // After clipping, the first moment is (1-beta1) * g * 0.1.
    let m = &store.get_param("w").m;
    for &x in m.iter() {
        assert!((x - 0.1 * 0.1).abs() < 1e-12);
    }
}

#[test]
fn adam_skips_update_on_non_finite_gradient() {
    let mut store = ParamStore::new();
    store.declare("w", Array2::from_elem((1, 2), 1.0));
    store.get_mut("w").grad[(0, 0)] = f64::NAN;
    let err = store.adam_step(&AdamConfig::default());
    assert!(err.is_err());
    assert_eq!(store.get("w")[(0, 0)], 1.0, "value must be untouched");
    assert_eq!(store.step, 0);
}

#[test]
fn adam_default_learning_rate() {
    let cfg = AdamConfig::default();
    assert_eq!(cfg.lr, 1e-4);
    assert_eq!(cfg.beta1, 0.9);
    assert_eq!(cfg.beta2, 0.999);
    assert_eq!(cfg.max_grad_norm, 1.0);
}

#[test]
fn mlp_zero_weights_returns_bias() {
    let cfg = MlpConfig::with_hidden(4, vec![5], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut store = ParamStore::new();
    mlp_init(&mut store, "m", &cfg, &mut rng);
    store.get_mut("m.l0.w").value.fill(0.0);
    store.get_mut("m.l1.w").value.fill(0.0);
    store.get_mut("m.l1.b").value.assign(&Array2::from_shape_fn((1, 3), |(_, j)| j as f64));
    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let x = tape.constant(rand_arr(&mut rng, 6, 4, 2.0));
    let out = mlp_forward(&mut tape, &mut bind, &store, "m", &cfg, x);
    for i in 0..6 {
        for j in 0..3 {
            assert_eq!(tape.value(out)[(i, j)], j as f64);
        }
    }
}

#[test]
fn mlp_identity_single_layer() {
    let cfg = MlpConfig::with_hidden(3, vec![], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut store = ParamStore::new();
    mlp_init(&mut store, "m", &cfg, &mut rng);
    store.get_mut("m.l0.w").value.assign(&Array2::eye(3));
    store.get_mut("m.l0.b").value.fill(0.0);
    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let input = rand_arr(&mut rng, 4, 3, 1.5);
    let x = tape.constant(input.clone());
    let out = mlp_forward(&mut tape, &mut bind, &store, "m", &cfg, x);
    assert_eq!(tape.value(out), &input);
}

#[test]
fn mlp_matches_hand_rolled_oracle() {
    let cfg = MlpConfig::with_hidden(5, vec![7, 6, 4], 3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    mlp_init(&mut store, "m", &cfg, &mut rng);
    let x = rand_arr(&mut rng, 8, 5, 1.0);

    let mut tape = Tape::new(false);
    let mut bind = Bindings::new();
    let xid = tape.constant(x.clone());
    let out = mlp_forward(&mut tape, &mut bind, &store, "m", &cfg, xid);
    let got = tape.value(out).clone();

    // Independent dense-matrix oracle with explicit loops.
    let elu = |v: f64| if v > 0.0 { v } else { v.exp() - 1.0 };
    let mut h: Vec<Vec<f64>> = (0..8).map(|i| x.row(i).to_vec()).collect();
    let dims = [5usize, 7, 6, 4, 3];
    for layer in 0..4 {
        let w = store.get(&format!("m.l{layer}.w"));
        let b = store.get(&format!("m.l{layer}.b"));
        let mut next = vec![vec![0.0; dims[layer + 1]]; 8];
        for (i, row) in h.iter().enumerate() {
            for j in 0..dims[layer + 1] {
                let mut acc = b[(0, j)];
                for (k, &hk) in row.iter().enumerate() {
                    acc += hk * w[(k, j)];
                }
                next[i][j] = if layer < 3 { elu(acc) } else { acc };
            }
        }
        h = next;
    }
    for i in 0..8 {
        for j in 0..3 {
            assert!((got[(i, j)] - h[i][j]).abs() < 1e-12);
        }
    }
}

#[test]
fn gaussian_kl_closed_forms() {
    // Identical distributions.
    assert_eq!(kl_plain(&[0.3, -0.2], &[0.1, 0.4], &[0.3, -0.2], &[0.1, 0.4]), 0.0);
    // Same std, means differing by delta: KL = delta^2 / (2 sigma^2) per dim.
    let sigma = 0.7f64;
    let delta = 0.25f64;
    let kl = kl_plain(&[delta], &[sigma.ln()], &[0.0], &[sigma.ln()]);
    assert!((kl - delta * delta / (2.0 * sigma * sigma)).abs() < 1e-12);
    // Nonnegativity over random pairs.
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10_000 {
        let mp: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lp: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.0)).collect();
        let mq: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let lq: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.0)).collect();
        assert!(kl_plain(&mp, &lp, &mq, &lq) >= 0.0);
    }
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let cfg = MlpConfig::with_hidden(3, vec![4], 2);
    let mut store = ParamStore::new();
    mlp_init(&mut store, "m", &cfg, &mut rng);
    store.step = 17;
    store.get_mut("m.l0.w").m.fill(0.25);
    store.get_mut("m.l1.w").v.fill(0.5);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("test.ckpt");
    let config = serde_json::json!({"kind": "test", "mlp": {"hidden": [4]}});
    save_checkpoint(&path, &config, &[("net", &store)]).unwrap();
    let (loaded_cfg, stores) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded_cfg, config);
    assert_eq!(stores.len(), 1);
    assert_eq!(stores[0].0, "net");
    let ls = &stores[0].1;
    assert_eq!(ls.step, 17);
    for (name, p) in store.iter() {
        assert_eq!(&p.value, ls.get(name));
        assert_eq!(&p.m, &ls.get_param(name).m);
        assert_eq!(&p.v, &ls.get_param(name).v);
    }
}

#[test]
fn checkpoint_rejects_bad_magic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.ckpt");
    std::fs::write(&path, b"NOTACHECKPOINTFILE....").unwrap();
    assert!(load_checkpoint(&path).is_err());
}

/// Same seed must give bit-identical parameter trajectories.
#[test]
fn seeded_training_is_bit_identical() {
    let run = || -> Vec<u64> {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let cfg = MlpConfig::with_hidden(4, vec![6], 2);
        let mut store = ParamStore::new();
        mlp_init(&mut store, "m", &cfg, &mut rng);
        let adam = AdamConfig::with_lr(1e-3);
        for _ in 0..20 {
            let x = rand_arr(&mut rng, 8, 4, 1.0);
            let y = rand_arr(&mut rng, 8, 2, 1.0);
            let mut tape = Tape::new(true);
            let mut bind = Bindings::new();
            let xid = tape.constant(x);
            let out = mlp_forward(&mut tape, &mut bind, &store, "m", &cfg, xid);
            let yid = tape.constant(y);
            let diff = tape.sub(out, yid);
            let sq = tape.square(diff);
            let loss = tape.mean_all(sq);
            let grads = tape.backward(loss).unwrap();
            bind.accumulate(&grads, &mut store);
            store.adam_step(&adam).unwrap();
        }
        store.iter().flat_map(|(_, p)| p.value.iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect()
    };
    assert_eq!(run(), run());
}
