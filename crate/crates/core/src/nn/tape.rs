//! Reverse-mode automatic differentiation on a flat tape of 2-D tensors.
//!
//! Every value is an `Array2<f64>`; vectors are `(1, n)` rows and scalars are
//! `(1, 1)`. Ops append nodes to the tape, so node ids are already in
//! topological order and the graph is acyclic by construction. Each node
//! stores one VJP closure per parent; `backward` walks the tape in reverse,
//! accumulating gradients (summing over all uses of a node).

use std::rc::Rc;

use ndarray::{s, Array2, Axis};

use crate::nn::NnError;

/// Index of a node on the tape.
pub type NodeId = usize;

type Vjp = Box<dyn Fn(&Array2<f64>) -> Array2<f64>>;

struct Node {
    value: Rc<Array2<f64>>,
    parents: Vec<(NodeId, Vjp)>,
}

/// Gradient tape. Create with `grad: false` for inference-only forwards
/// (no VJP closures are allocated and `backward` is unavailable).
pub struct Tape {
    nodes: Vec<Node>,
    recording: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by node id.
pub struct Grads {
    grads: Vec<Option<Array2<f64>>>,
}

impl Grads {
    /// Gradient of the loss w.r.t. the given node; zeros if the node
    /// does not influence the loss.
    pub fn get(&self, id: NodeId, shape: (usize, usize)) -> Array2<f64> {
        match &self.grads[id] {
            Some(g) => g.clone(),
            None => Array2::zeros(shape),
        }
    }

    pub fn get_ref(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.grads[id].as_ref()
    }
}

impl Tape {
    pub fn new(grad: bool) -> Self {
        Tape { nodes: Vec::new(), recording: grad }
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Value of a node.
    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    fn rc_value(&self, id: NodeId) -> Rc<Array2<f64>> {
        Rc::clone(&self.nodes[id].value)
    }

    fn push(&mut self, value: Array2<f64>, parents: Vec<(NodeId, Vjp)>) -> NodeId {
        let parents = if self.recording { parents } else { Vec::new() };
        self.nodes.push(Node { value: Rc::new(value), parents });
        self.nodes.len() - 1
    }

    /// Leaf node with no gradient flow upstream (inputs, detached memory).
    pub fn constant(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Vec::new())
    }

    /// Leaf node for a parameter tensor; gradients are read back by id.
    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Vec::new())
    }

    // ---- elementwise binary ----

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) + self.value(b);
        self.push(
            v,
            vec![
                (a, Box::new(|g: &Array2<f64>| g.clone()) as Vjp),
                (b, Box::new(|g: &Array2<f64>| g.clone())),
            ],
        )
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a) - self.value(b);
        self.push(
            v,
            vec![
                (a, Box::new(|g: &Array2<f64>| g.clone()) as Vjp),
                (b, Box::new(|g: &Array2<f64>| -g)),
            ],
        )
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        let v = &*va * &*vb;
        self.push(
            v,
            vec![
                (a, Box::new(move |g: &Array2<f64>| g * &*vb) as Vjp),
                (b, Box::new(move |g: &Array2<f64>| g * &*va)),
            ],
        )
    }

    /// `a (m,n) + b (1,n)`, broadcasting the row over all rows of `a`.
    pub fn add_rowvec(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let vb = self.rc_value(b);
        debug_assert_eq!(vb.nrows(), 1);
        let v = self.value(a) + &*vb;
        self.push(
            v,
            vec![
                (a, Box::new(|g: &Array2<f64>| g.clone()) as Vjp),
                (
                    b,
                    Box::new(|g: &Array2<f64>| {
                        g.sum_axis(Axis(0)).insert_axis(Axis(0))
                    }),
                ),
            ],
        )
    }

    /// `a (m,n) * b (1,n)` elementwise with the row broadcast over rows.
    pub fn mul_rowvec(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        debug_assert_eq!(vb.nrows(), 1);
        let v = &*va * &*vb;
        let vb2 = Rc::clone(&vb);
        self.push(
            v,
            vec![
                (a, Box::new(move |g: &Array2<f64>| g * &*vb2) as Vjp),
                (
                    b,
                    Box::new(move |g: &Array2<f64>| {
                        (g * &*va).sum_axis(Axis(0)).insert_axis(Axis(0))
                    }),
                ),
            ],
        )
    }

    // ---- matmul / transpose ----

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        assert_eq!(
            va.ncols(),
            vb.nrows(),
            "matmul shape mismatch: {:?} x {:?}",
            va.dim(),
            vb.dim()
        );
        let v = va.dot(&*vb);
        let va2 = Rc::clone(&va);
        let vb2 = Rc::clone(&vb);
        self.push(
            v,
            vec![
                (a, Box::new(move |g: &Array2<f64>| g.dot(&vb2.t())) as Vjp),
                (b, Box::new(move |g: &Array2<f64>| va2.t().dot(g))),
            ],
        )
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).t().to_owned();
        self.push(v, vec![(a, Box::new(|g: &Array2<f64>| g.t().to_owned()) as Vjp)])
    }

    // ---- scalar ----

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) * c;
        self.push(v, vec![(a, Box::new(move |g: &Array2<f64>| g * c) as Vjp)])
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a) + c;
        self.push(v, vec![(a, Box::new(|g: &Array2<f64>| g.clone()) as Vjp)])
    }

    // ---- elementwise unary ----

    pub fn elu(&mut self, a: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let v = va.mapv(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let d = va.mapv(|x| if x > 0.0 { 1.0 } else { x.exp() });
                    g * &d
                }) as Vjp,
            )],
        )
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::tanh);
        let vr = Rc::new(v.clone());
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| g * &vr.mapv(|y| 1.0 - y * y)) as Vjp,
            )],
        )
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(|x| 1.0 / (1.0 + (-x).exp()));
        let vr = Rc::new(v.clone());
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| g * &vr.mapv(|y| y * (1.0 - y))) as Vjp,
            )],
        )
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).mapv(f64::exp);
        let vr = Rc::new(v.clone());
        self.push(v, vec![(a, Box::new(move |g: &Array2<f64>| g * &*vr) as Vjp)])
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let v = va.mapv(f64::ln);
        self.push(
            v,
            vec![(a, Box::new(move |g: &Array2<f64>| g / &*va) as Vjp)],
        )
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let v = va.mapv(|x| x * x);
        self.push(
            v,
            vec![(a, Box::new(move |g: &Array2<f64>| g * &(2.0 * &*va)) as Vjp)],
        )
    }

    /// Elementwise minimum of two tensors (ties route gradient to `a`).
    pub fn min2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let va = self.rc_value(a);
        let vb = self.rc_value(b);
        let mut v = Array2::zeros(va.dim());
        ndarray::Zip::from(&mut v).and(&*va).and(&*vb).for_each(|o, &x, &y| *o = x.min(y));
        let va2 = Rc::clone(&va);
        let vb2 = Rc::clone(&vb);
        self.push(
            v,
            vec![
                (
                    a,
                    Box::new(move |g: &Array2<f64>| {
                        let mut out = g.clone();
                        ndarray::Zip::from(&mut out).and(&*va).and(&*vb).for_each(
                            |o, &x, &y| {
                                if x > y {
                                    *o = 0.0
                                }
                            },
                        );
                        out
                    }) as Vjp,
                ),
                (
                    b,
                    Box::new(move |g: &Array2<f64>| {
                        let mut out = g.clone();
                        ndarray::Zip::from(&mut out).and(&*va2).and(&*vb2).for_each(
                            |o, &x, &y| {
                                if x <= y {
                                    *o = 0.0
                                }
                            },
                        );
                        out
                    }),
                ),
            ],
        )
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let va = self.rc_value(a);
        let v = va.mapv(|x| x.clamp(lo, hi));
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let d = va.mapv(|x| if x > lo && x < hi { 1.0 } else { 0.0 });
                    g * &d
                }) as Vjp,
            )],
        )
    }

    // ---- row-wise ----

    /// Row-wise softmax. Masking is done by adding a large negative
    /// constant to masked-out scores before this op.
    pub fn row_softmax(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let mut v = Array2::zeros(va.dim());
        for (i, row) in va.outer_iter().enumerate() {
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ex: Vec<f64> = row.iter().map(|&x| (x - mx).exp()).collect();
            let sum: f64 = ex.iter().sum();
            for (j, e) in ex.iter().enumerate() {
                v[(i, j)] = e / sum;
            }
        }
        let vr = Rc::new(v.clone());
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let mut out = Array2::zeros(g.dim());
                    for i in 0..g.nrows() {
                        let s = vr.row(i);
                        let gr = g.row(i);
                        let dot: f64 = s.iter().zip(gr.iter()).map(|(&si, &gi)| si * gi).sum();
                        for j in 0..g.ncols() {
                            out[(i, j)] = s[j] * (gr[j] - dot);
                        }
                    }
                    out
                }) as Vjp,
            )],
        )
    }

    /// Row-wise layer normalization without affine terms:
    /// `(x - mean) / sqrt(var + eps)` per row.
    pub fn layer_norm_row(&mut self, a: NodeId, eps: f64) -> NodeId {
        let va = self.rc_value(a);
        let n = va.ncols() as f64;
        let mut v = Array2::zeros(va.dim());
        let mut inv_std = Vec::with_capacity(va.nrows());
        for (i, row) in va.outer_iter().enumerate() {
            let mean = row.mean().unwrap();
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (j, &x) in row.iter().enumerate() {
                v[(i, j)] = (x - mean) * is;
            }
        }
        let xhat = Rc::new(v.clone());
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    // dx = (g - mean(g) - xhat * mean(g * xhat)) * inv_std
                    let mut out = Array2::zeros(g.dim());
                    for i in 0..g.nrows() {
                        let gr = g.row(i);
                        let xr = xhat.row(i);
                        let gm = gr.mean().unwrap();
                        let gxm: f64 =
                            gr.iter().zip(xr.iter()).map(|(&gi, &xi)| gi * xi).sum::<f64>() / n;
                        for j in 0..g.ncols() {
                            out[(i, j)] = (gr[j] - gm - xr[j] * gxm) * inv_std[i];
                        }
                    }
                    out
                }) as Vjp,
            )],
        )
    }

    // ---- reductions ----

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.value(a).dim();
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| Array2::from_elem((m, n), g[(0, 0)])) as Vjp,
            )],
        )
    }

    pub fn mean_all(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.value(a).dim();
        let count = (m * n) as f64;
        let v = Array2::from_elem((1, 1), self.value(a).sum() / count);
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| Array2::from_elem((m, n), g[(0, 0)] / count))
                    as Vjp,
            )],
        )
    }

    /// `(m,n) -> (m,1)` summing each row.
    pub fn sum_cols(&mut self, a: NodeId) -> NodeId {
        let (_, n) = self.value(a).dim();
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let m = g.nrows();
                    let mut out = Array2::zeros((m, n));
                    for i in 0..m {
                        out.row_mut(i).fill(g[(i, 0)]);
                    }
                    out
                }) as Vjp,
            )],
        )
    }

    /// `(m,n) -> (1,n)` summing each column.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let (m, _) = self.value(a).dim();
        let v = self.value(a).sum_axis(Axis(0)).insert_axis(Axis(0));
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let n = g.ncols();
                    let mut out = Array2::zeros((m, n));
                    for i in 0..m {
                        out.row_mut(i).assign(&g.row(0));
                    }
                    out
                }) as Vjp,
            )],
        )
    }

    // ---- structural ----

    pub fn concat_rows(&mut self, ids: &[NodeId]) -> NodeId {
        let views: Vec<_> = ids.iter().map(|&id| self.value(id).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows shape mismatch");
        let mut parents: Vec<(NodeId, Vjp)> = Vec::new();
        let mut offset = 0;
        for &id in ids {
            let rows = self.value(id).nrows();
            let start = offset;
            parents.push((
                id,
                Box::new(move |g: &Array2<f64>| g.slice(s![start..start + rows, ..]).to_owned()),
            ));
            offset += rows;
        }
        self.push(v, parents)
    }

    pub fn concat_cols(&mut self, ids: &[NodeId]) -> NodeId {
        let views: Vec<_> = ids.iter().map(|&id| self.value(id).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols shape mismatch");
        let mut parents: Vec<(NodeId, Vjp)> = Vec::new();
        let mut offset = 0;
        for &id in ids {
            let cols = self.value(id).ncols();
            let start = offset;
            parents.push((
                id,
                Box::new(move |g: &Array2<f64>| g.slice(s![.., start..start + cols]).to_owned()),
            ));
            offset += cols;
        }
        self.push(v, parents)
    }

    pub fn slice_rows(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let (m, n) = self.value(a).dim();
        let v = self.value(a).slice(s![start..start + len, ..]).to_owned();
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let mut out = Array2::zeros((m, n));
                    out.slice_mut(s![start..start + len, ..]).assign(g);
                    out
                }) as Vjp,
            )],
        )
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> NodeId {
        let (m, n) = self.value(a).dim();
        let v = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(
            v,
            vec![(
                a,
                Box::new(move |g: &Array2<f64>| {
                    let mut out = Array2::zeros((m, n));
                    out.slice_mut(s![.., start..start + len]).assign(g);
                    out
                }) as Vjp,
            )],
        )
    }

    /// Relative-position score alignment for transformer attention.
    ///
    /// Input `b` is `(T, K)` where column `k` scores relative offset `k`
    /// (how far into the past a key sits). Output is `(T, S)` over key
    /// positions `j` with `out[i, j] = b[i, mem_len + i - j]` when the
    /// offset lies in `[0, K)`, else 0 (such entries are masked out of the
    /// subsequent softmax anyway).
    pub fn rel_shift(&mut self, b: NodeId, mem_len: usize, total_keys: usize) -> NodeId {
        let vb = self.value(b);
        let (t, k) = vb.dim();
        let mut v = Array2::zeros((t, total_keys));
        for i in 0..t {
            for j in 0..total_keys {
                let off = mem_len + i;
                if off >= j && off - j < k {
                    v[(i, j)] = vb[(i, off - j)];
                }
            }
        }
        self.push(
            v,
            vec![(
                b,
                Box::new(move |g: &Array2<f64>| {
                    let mut out = Array2::zeros((t, k));
                    for i in 0..t {
                        for j in 0..total_keys {
                            let off = mem_len + i;
                            if off >= j && off - j < k {
                                out[(i, off - j)] += g[(i, j)];
                            }
                        }
                    }
                    out
                }) as Vjp,
            )],
        )
    }

    /// Reverse-mode pass from a scalar loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Grads, NnError> {
        assert!(self.recording, "backward on a non-recording tape");
        let dim = self.value(loss).dim();
        if dim != (1, 1) {
            return Err(NnError::NonScalarLoss { rows: dim.0, cols: dim.1 });
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(Array2::from_elem((1, 1), 1.0));
        for id in (0..=loss).rev() {
            let Some(g) = grads[id].take() else { continue };
            for (pid, vjp) in &self.nodes[id].parents {
                let contribution = vjp(&g);
                match &mut grads[*pid] {
                    Some(acc) => *acc += &contribution,
                    slot => *slot = Some(contribution),
                }
            }
            grads[id] = Some(g);
        }
        Ok(Grads { grads })
    }
}
