//! Per-row losses returning the loss value and writing d(loss)/d(output).

use crate::nn::Real;

pub fn softmax_in_place<R: Real>(row: &mut [R]) {
    let max = row.iter().copied().fold(R::neg_infinity(), R::max);
    let mut sum = R::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Independent softmax over each consecutive segment of `logits`.
pub fn segment_softmax<R: Real>(logits: &[R], segments: &[usize]) -> Vec<R> {
    let mut out = logits.to_vec();
    let mut start = 0;
    for &len in segments {
        softmax_in_place(&mut out[start..start + len]);
        start += len;
    }
    out
}

/// Gradient of a loss through per-segment softmax, given the softmax
/// outputs `probs` and the loss gradient `grad_probs` with respect to them.
pub fn segment_softmax_backward<R: Real>(probs: &[R], grad_probs: &[R], segments: &[usize], grad_logits: &mut [R]) {
    let mut start = 0;
    for &len in segments {
        let p = &probs[start..start + len];
        let g = &grad_probs[start..start + len];
        let dot: R = p.iter().zip(g).map(|(&a, &b)| a * b).sum();
        for i in 0..len {
            grad_logits[start + i] = p[i] * (g[i] - dot);
        }
        start += len;
    }
}

/// Sum over segments of sparse categorical cross-entropy for one row.
pub fn sparse_ce<R: Real>(logits: &[R], segments: &[usize], targets: &[usize], grad: &mut [R]) -> R {
    debug_assert_eq!(segments.len(), targets.len());
    let mut loss = R::zero();
    let mut start = 0;
    for (&len, &t) in segments.iter().zip(targets) {
        let seg = &logits[start..start + len];
        let max = seg.iter().copied().fold(R::neg_infinity(), R::max);
        let lse = seg.iter().map(|&v| (v - max).exp()).sum::<R>().ln() + max;
        loss += lse - seg[t];
        for i in 0..len {
            grad[start + i] = (seg[i] - lse).exp();
        }
        grad[start + t] -= R::one();
        start += len;
    }
    loss
}

pub fn mse<R: Real>(output: &[R], target: &[R], grad: &mut [R]) -> R {
    let n = R::of(output.len() as f64);
    let mut loss = R::zero();
    for i in 0..output.len() {
        let d = output[i] - target[i];
        loss += d * d;
        grad[i] = (d + d) / n;
    }
    loss / n
}

/// Negative Bernoulli log-likelihood of `x` under per-pixel logits.
pub fn bernoulli_nll<R: Real>(logits: &[R], x: &[R], grad: &mut [R]) -> R {
    let mut loss = R::zero();
    for i in 0..logits.len() {
        let l = logits[i];
        // softplus(l) - x l, computed stably
        let softplus = l.max(R::zero()) + (-l.abs()).exp().ln_1p();
        loss += softplus - x[i] * l;
        grad[i] = R::one() / (R::one() + (-l).exp()) - x[i];
    }
    loss
}

/// Negative Gaussian log-likelihood with fixed per-value variance.
pub fn gaussian_nll<R: Real>(mean: &[R], x: &[R], variance: f64, grad: &mut [R]) -> R {
    let var = R::of(variance);
    let norm = R::of(0.5 * (std::f64::consts::TAU * variance).ln());
    let mut loss = R::zero();
    for i in 0..mean.len() {
        let d = mean[i] - x[i];
        loss += d * d / (var + var) + norm;
        grad[i] = d / var;
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn close(a: &[f64], b: &[f64]) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-6 * (1.0 + x.abs().max(y.abs())), "{x} vs {y}");
        }
    }

    #[test]
    fn cross_entropy_gradient() {
        let logits = [0.3, -1.2, 2.0, 0.1, 0.7];
        let segs = [3, 2];
        let t = [1, 0];
        let mut g = [0.0; 5];
        sparse_ce(&logits, &segs, &t, &mut g);
        let num = fd(|l| sparse_ce(l, &segs, &t, &mut [0.0; 5]), &logits);
        close(&g, &num);
    }

    #[test]
    fn likelihood_gradients() {
        let l = [0.3, -2.2, 4.0];
        let x = [1.0, 0.25, 0.0];
        let mut g = [0.0; 3];
        bernoulli_nll(&l, &x, &mut g);
        close(&g, &fd(|v| bernoulli_nll(v, &x, &mut [0.0; 3]), &l));
        gaussian_nll(&l, &x, 0.1, &mut g);
        close(&g, &fd(|v| gaussian_nll(v, &x, 0.1, &mut [0.0; 3]), &l));
        mse(&l, &x, &mut g);
        close(&g, &fd(|v| mse(v, &x, &mut [0.0; 3]), &l));
    }

    #[test]
    fn softmax_backward_matches_fd() {
        let logits = [0.5, -0.5, 1.5, 0.0, 2.0];
        let segs = [2, 3];
        let w = [0.3, -1.0, 2.0, 0.5, -0.7];
        let f = |l: &[f64]| -> f64 { segment_softmax(l, &segs).iter().zip(&w).map(|(p, w)| p * w).sum() };
        let p = segment_softmax(&logits, &segs);
        let mut g = [0.0; 5];
        segment_softmax_backward(&p, &w, &segs, &mut g);
        close(&g, &fd(f, &logits));
        assert!((p[..2].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p[2..].iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
