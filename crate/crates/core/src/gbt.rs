//! Multiclass gradient-boosted regression trees on softmax cross-entropy.
//!
//! Features are quantile-binned once (at most `max_bins` thresholds per
//! feature); every round fits one depth-limited tree per class to the
//! Newton step of the softmax loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtConfig {
    pub max_depth: usize,
    pub n_rounds: usize,
    pub learning_rate: f64,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub max_bins: usize,
    pub min_child_hessian: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self { max_depth: 4, n_rounds: 100, learning_rate: 0.1, lambda: 1.0, max_bins: 64, min_child_hessian: 1e-6 }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == 0 || self.n_rounds == 0 || self.max_bins < 2 {
            return Err(Error::Config("tree ensemble needs max_depth, n_rounds >= 1 and max_bins >= 2".into()));
        }
        if !(self.learning_rate > 0.0 && self.lambda >= 0.0) {
            return Err(Error::Config("tree ensemble learning_rate must be > 0 and lambda >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => i = if x[feature] <= threshold { left } else { right },
                Node::Leaf { value } => return value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub num_classes: usize,
    pub num_features: usize,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    /// Initial per-class scores (log class priors).
    pub base_score: Vec<f64>,
    /// `trees[round][class]`; empty for a constant predictor.
    pub trees: Vec<Vec<Tree>>,
}

struct Binned {
    /// Column-major bin codes.
    codes: Vec<Vec<u8>>,
    /// Upper edge of every bin but the last, per feature.
    edges: Vec<Vec<f64>>,
}

fn bin_features(x: &Matrix<f64>, max_bins: usize) -> Binned {
    let (n, d) = (x.rows(), x.cols());
    let max_bins = max_bins.min(256);
    let mut codes = Vec::with_capacity(d);
    let mut edges = Vec::with_capacity(d);
    for f in 0..d {
        let mut col: Vec<f64> = (0..n).map(|r| x.get(r, f)).collect();
        col.sort_by(f64::total_cmp);
        col.dedup();
        let cuts: Vec<f64> = if col.len() <= max_bins {
            col.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
        } else {
            let mut c: Vec<f64> = (1..max_bins)
                .map(|b| {
                    let i = b * col.len() / max_bins;
                    0.5 * (col[i - 1] + col[i])
                })
                .collect();
            c.dedup();
            c
        };
        codes.push((0..n).map(|r| cuts.partition_point(|&e| e < x.get(r, f)) as u8).collect());
        edges.push(cuts);
    }
    Binned { codes, edges }
}

struct Builder<'a> {
    binned: &'a Binned,
    cfg: &'a GbtConfig,
    grad: &'a [f64],
    hess: &'a [f64],
    nodes: Vec<Node>,
    /// Leaf value reached by every training row.
    row_value: Vec<f64>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize], g: f64, h: f64) -> usize {
        let value = -g / (h + self.cfg.lambda).max(1e-12);
        for &r in rows {
            self.row_value[r] = value;
        }
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.cfg.lambda).max(1e-12)
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        if depth == self.cfg.max_depth || rows.len() < 2 {
            return self.leaf(&rows, g, h);
        }
        let parent = self.score(g, h);
        // Zero-gain splits are accepted: symmetric problems such as xor
        // only show gain one level below the first split.
        let mut best: Option<(f64, usize, usize)> = None;
        let mut hist_g = [0f64; 256];
        let mut hist_h = [0f64; 256];
        let mut hist_n = [0usize; 256];
        for (f, codes) in self.binned.codes.iter().enumerate() {
            let nb = self.binned.edges[f].len() + 1;
            if nb < 2 {
                continue;
            }
            hist_g[..nb].fill(0.0);
            hist_h[..nb].fill(0.0);
            hist_n[..nb].fill(0);
            for &r in &rows {
                let b = codes[r] as usize;
                hist_g[b] += self.grad[r];
                hist_h[b] += self.hess[r];
                hist_n[b] += 1;
            }
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0);
            for b in 0..nb - 1 {
                gl += hist_g[b];
                hl += hist_h[b];
                nl += hist_n[b];
                if nl == 0 || nl == rows.len() {
                    continue;
                }
                let hr = h - hl;
                if hl < self.cfg.min_child_hessian || hr < self.cfg.min_child_hessian {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(g - gl, hr) - parent;
                if gain >= -1e-12 && best.is_none_or(|(bg, _, _)| gain > bg + 1e-12) {
                    best = Some((gain, f, b));
                }
            }
        }
        let Some((_, feature, bin)) = best else {
            return self.leaf(&rows, g, h);
        };
        let codes = &self.binned.codes[feature];
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| codes[r] as usize <= bin);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold: self.binned.edges[feature][bin], left, right };
        id
    }
}

fn softmax_rows(scores: &[f64], k: usize) -> Vec<f64> {
    let mut p = scores.to_vec();
    for row in p.chunks_mut(k) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// Mean softmax cross-entropy of `probs` (row-major, `k` columns).
pub fn log_loss(probs: &Matrix<f64>, labels: &[usize]) -> f64 {
    labels.iter().enumerate().map(|(r, &y)| -probs.get(r, y).max(1e-300).ln()).sum::<f64>() / labels.len().max(1) as f64
}

impl TreeEnsemble {
    /// Fits `num_classes`-way boosting on (x, labels). A label set with a
    /// single observed class yields a constant predictor.
    pub fn fit(x: &Matrix<f64>, labels: &[usize], num_classes: usize, cfg: &GbtConfig) -> Result<Self> {
        cfg.validate()?;
        let n = x.rows();
        if n < 2 || labels.len() != n {
            return Err(Error::InvalidInput(format!("tree ensemble needs >= 2 rows with one label each, got {n} rows and {} labels", labels.len())));
        }
        if num_classes == 0 || labels.iter().any(|&y| y >= num_classes) {
            return Err(Error::InvalidInput(format!("labels must lie in [0, {num_classes})")));
        }
        if !x.all_finite() {
            return Err(Error::NonFinite("tree ensemble features".into()));
        }
        let k = num_classes;
        let mut counts = vec![0usize; k];
        labels.iter().for_each(|&y| counts[y] += 1);
        let base_score: Vec<f64> = counts.iter().map(|&c| (c as f64 / n as f64).max(1e-6).ln()).collect();
        let mut ens = Self {
            num_classes: k,
            num_features: x.cols(),
            learning_rate: cfg.learning_rate,
            n_rounds: cfg.n_rounds,
            max_depth: cfg.max_depth,
            base_score,
            trees: Vec::new(),
        };
        if counts.iter().filter(|&&c| c > 0).count() < 2 {
            log::warn!("tree ensemble fit on a single observed class; using a constant predictor");
            return Ok(ens);
        }
        let binned = bin_features(x, cfg.max_bins);
        let mut scores: Vec<f64> = (0..n).flat_map(|_| ens.base_score.iter().copied()).collect();
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n];
        for _ in 0..cfg.n_rounds {
            let probs = softmax_rows(&scores, k);
            let mut round = Vec::with_capacity(k);
            let mut deltas = vec![0.0; n * k];
            for c in 0..k {
                for r in 0..n {
                    let p = probs[r * k + c];
                    grad[r] = p - (labels[r] == c) as u8 as f64;
                    hess[r] = (p * (1.0 - p)).max(1e-16);
                }
                let mut b = Builder { binned: &binned, cfg, grad: &grad, hess: &hess, nodes: Vec::new(), row_value: vec![0.0; n] };
                b.build((0..n).collect(), 0);
                let mut nodes = b.nodes;
                for node in nodes.iter_mut() {
                    if let Node::Leaf { value } = node {
                        *value *= cfg.learning_rate;
                    }
                }
                for r in 0..n {
                    deltas[r * k + c] = b.row_value[r] * cfg.learning_rate;
                }
                round.push(Tree { nodes });
            }
            scores.iter_mut().zip(&deltas).for_each(|(s, d)| *s += d);
            ens.trees.push(round);
        }
        Ok(ens)
    }

    pub fn is_constant(&self) -> bool {
        self.trees.is_empty()
    }

    /// Raw additive scores using the first `rounds` rounds.
    fn scores_upto(&self, x: &[f64], rounds: usize) -> Vec<f64> {
        let mut s = self.base_score.clone();
        for round in &self.trees[..rounds.min(self.trees.len())] {
            for (c, t) in round.iter().enumerate() {
                s[c] += t.predict(x);
            }
        }
        s
    }

    fn check(&self, x: &Matrix<f64>) -> Result<()> {
        if x.cols() != self.num_features {
            return Err(Error::Shape(format!("{} features given, ensemble expects {}", x.cols(), self.num_features)));
        }
        Ok(())
    }

    /// Class probabilities using only the first `rounds` boosting rounds.
    pub fn predict_proba_upto(&self, x: &Matrix<f64>, rounds: usize) -> Result<Matrix<f64>> {
        self.check(x)?;
        let mut scores = Vec::with_capacity(x.rows() * self.num_classes);
        for r in 0..x.rows() {
            scores.extend(self.scores_upto(x.row(r), rounds));
        }
        Matrix::from_vec(x.rows(), self.num_classes, softmax_rows(&scores, self.num_classes))
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        self.predict_proba_upto(x, self.trees.len())
    }

    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows()).map(|r| crate::nn::argmax(p.row(r))).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn xor() -> (Matrix<f64>, Vec<usize>) {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        (x, vec![0, 1, 1, 0])
    }

    #[test]
    fn solves_four_point_xor() {
        let (x, y) = xor();
        let cfg = GbtConfig { max_depth: 2, n_rounds: 50, ..Default::default() };
        let ens = TreeEnsemble::fit(&x, &y, 2, &cfg).unwrap();
        assert_eq!(ens.predict(&x).unwrap(), y);
        assert!(ens.trees.iter().flatten().all(|t| t.depth() <= 2));
    }

    #[test]
    fn constant_labels_give_constant_predictor() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let ens = TreeEnsemble::fit(&x, &[2, 2, 2], 4, &GbtConfig::default()).unwrap();
        assert!(ens.is_constant());
        let p = ens.predict_proba(&Matrix::from_rows(&[vec![-5.0], vec![9.0]]).unwrap()).unwrap();
        for r in 0..2 {
            assert!(p.get(r, 2) >= 0.99);
        }
    }

    fn blobs(n: usize, k: usize, seed: u64) -> (Matrix<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % k;
            rows.push(vec![c as f64 + rng.random_range(-0.8..0.8), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            y.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn probabilities_sum_to_one_and_loss_decreases() {
        let (x, y) = blobs(300, 4, 1);
        let cfg = GbtConfig { n_rounds: 30, ..Default::default() };
        let ens = TreeEnsemble::fit(&x, &y, 4, &cfg).unwrap();
        let p = ens.predict_proba(&x).unwrap();
        for r in 0..p.rows() {
            assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let mut prev = f64::INFINITY;
        for rounds in 0..=30 {
            let l = log_loss(&ens.predict_proba_upto(&x, rounds).unwrap(), &y);
            assert!(l <= prev + 1e-12, "round {rounds}: {l} > {prev}");
            prev = l;
        }
        let acc = ens.predict(&x).unwrap().iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(acc as f64 / 300.0 > 0.9);
    }

    #[test]
    fn deep_trees_memorize_small_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let y: Vec<usize> = (0..100).map(|_| rng.random_range(0..5)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let cfg = GbtConfig { max_depth: 8, n_rounds: 100, learning_rate: 0.3, max_bins: 128, ..Default::default() };
        let ens = TreeEnsemble::fit(&x, &y, 5, &cfg).unwrap();
        let acc = ens.predict(&x).unwrap().iter().zip(&y).filter(|(a, b)| a == b).count();
        assert!(acc >= 99, "{acc}");
    }

    #[test]
    fn deterministic_and_serializable() {
        let (x, y) = blobs(80, 3, 2);
        let cfg = GbtConfig { n_rounds: 10, ..Default::default() };
        let a = TreeEnsemble::fit(&x, &y, 3, &cfg).unwrap();
        let b = TreeEnsemble::fit(&x, &y, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.contains("\"feature\"") && json.contains("\"threshold\"") && json.contains("\"value\""));
        let back: TreeEnsemble = serde_json::from_str(&json).unwrap();
        assert_eq!(back.predict_proba(&x).unwrap(), a.predict_proba(&x).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let (x, _) = xor();
        assert!(TreeEnsemble::fit(&x, &[0, 1, 2, 0], 2, &GbtConfig::default()).is_err());
        assert!(TreeEnsemble::fit(&x, &[0, 1], 2, &GbtConfig::default()).is_err());
        let ens = TreeEnsemble::fit(&x, &[0, 1, 1, 0], 2, &GbtConfig { n_rounds: 2, ..Default::default() }).unwrap();
        assert!(ens.predict(&Matrix::zeros(1, 3)).is_err());
    }
}
