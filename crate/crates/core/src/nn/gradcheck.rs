//! Central finite-difference verification of tape gradients. Test support:
//! the numeric side only re-runs forwards, so it is independent of the
//! reverse-mode path it checks.

use ndarray::Array2;

use crate::nn::tape::Tape;

/// Max relative error between tape gradients and central finite differences
/// over every coordinate of every input, with step `h`.
///
/// `build` must construct a scalar loss from leaf nodes created from
/// `inputs`, in order, on the given tape.
pub fn finite_diff_check<F>(build: F, inputs: &[Array2<f64>], h: f64) -> f64
where
    F: Fn(&mut Tape, &[usize]) -> usize,
{
    // Analytic pass.
    let mut tape = Tape::new(true);
    let ids: Vec<usize> = inputs.iter().map(|a| tape.leaf(a.clone())).collect();
    let loss = build(&mut tape, &ids);
    let grads = tape.backward(loss).expect("backward failed");
    let analytic: Vec<Array2<f64>> =
        ids.iter().zip(inputs.iter()).map(|(&id, a)| grads.get(id, a.dim())).collect();

    let eval = |xs: &[Array2<f64>]| -> f64 {
        let mut t = Tape::new(false);
        let ids: Vec<usize> = xs.iter().map(|a| t.leaf(a.clone())).collect();
        let loss = build(&mut t, &ids);
        t.value(loss)[(0, 0)]
    };

    // Relative error per input tensor: ||a - n|| / max(||a||, ||n||).
    // Aggregating over the tensor keeps single-coordinate truncation noise
    // from dominating while any wrong VJP still shows up at O(1).
    let mut worst = 0.0f64;
    let mut xs: Vec<Array2<f64>> = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        let mut numeric = Array2::zeros(input.dim());
        for idx in 0..input.len() {
            let (r, c) = (idx / input.ncols(), idx % input.ncols());
            let orig = xs[k][(r, c)];
            xs[k][(r, c)] = orig + h;
            let fp = eval(&xs);
            xs[k][(r, c)] = orig - h;
            let fm = eval(&xs);
            xs[k][(r, c)] = orig;
            numeric[(r, c)] = (fp - fm) / (2.0 * h);
        }
        let a = &analytic[k];
        let diff = (a - &numeric).mapv(|x| x * x).sum().sqrt();
        let na = a.mapv(|x| x * x).sum().sqrt();
        let nn = numeric.mapv(|x| x * x).sum().sqrt();
        worst = worst.max(diff / na.max(nn).max(1e-8));
    }
    worst
}
