//! Diagonal Gaussian posteriors, their KL divergences and the pairwise
//! averaging used by the weakly-supervised VAE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub log_variance: Vec<f64>,
}

impl GaussianPosterior {
    pub fn new(mean: Vec<f64>, log_variance: Vec<f64>) -> Result<Self> {
        if mean.len() != log_variance.len() {
            return Err(Error::Shape(format!("{} means, {} log-variances", mean.len(), log_variance.len())));
        }
        if mean.iter().chain(&log_variance).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("posterior parameters".into()));
        }
        Ok(Self { mean, log_variance })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], log_variance: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.log_variance[i].exp()
    }
}

/// Per-dimension KL(q || p) for scalar Gaussians given as (mean, log-variance).
pub fn kl_dim(mq: f64, lq: f64, mp: f64, lp: f64) -> f64 {
    let d = mq - mp;
    0.5 * (lp - lq + ((lq - lp).exp() + d * d * (-lp).exp()) - 1.0)
}

/// KL(q || N(0, 1)) per dimension: ½(μ² + σ² − log σ² − 1).
pub fn kl_standard_dim(m: f64, lv: f64) -> f64 {
    0.5 * (m * m + lv.exp() - lv - 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KlTerms {
    pub per_dim: Vec<f64>,
    pub total: f64,
}

/// Closed-form KL(q || p); `p = None` is the standard normal prior.
pub fn kl_gaussian(q: &GaussianPosterior, p: Option<&GaussianPosterior>) -> Result<KlTerms> {
    GaussianPosterior::new(q.mean.clone(), q.log_variance.clone())?;
    let per_dim: Vec<f64> = match p {
        None => q.mean.iter().zip(&q.log_variance).map(|(&m, &l)| kl_standard_dim(m, l)).collect(),
        Some(p) => {
            GaussianPosterior::new(p.mean.clone(), p.log_variance.clone())?;
            if p.dim() != q.dim() {
                return Err(Error::Shape(format!("KL between {}- and {}-dimensional posteriors", q.dim(), p.dim())));
            }
            (0..q.dim()).map(|i| kl_dim(q.mean[i], q.log_variance[i], p.mean[i], p.log_variance[i])).collect()
        }
    };
    // Rounding can leave tiny negatives for identical arguments.
    let per_dim: Vec<f64> = per_dim.into_iter().map(|v| v.max(0.0)).collect();
    Ok(KlTerms { total: per_dim.iter().sum(), per_dim })
}

/// Latent dimensions judged shared between the two views of a pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedSet {
    pub dims: Vec<usize>,
    pub threshold: f64,
}

impl SharedSet {
    pub fn empty() -> Self {
        Self { dims: Vec::new(), threshold: f64::NEG_INFINITY }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.dims.binary_search(&i).is_ok()
    }
}

/// δᵢ = ½(KL(q1ᵢ‖q2ᵢ) + KL(q2ᵢ‖q1ᵢ)).
pub fn symmetric_kl(m1: &[f64], l1: &[f64], m2: &[f64], l2: &[f64]) -> Vec<f64> {
    (0..m1.len())
        .map(|i| 0.5 * (kl_dim(m1[i], l1[i], m2[i], l2[i]) + kl_dim(m2[i], l2[i], m1[i], l1[i])))
        .collect()
}

/// Dimensions whose divergence lies strictly below the midpoint of the
/// smallest and largest divergence; all dimensions when they are equal.
pub fn shared_from_divergence(delta: &[f64]) -> SharedSet {
    let max = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = delta.iter().cloned().fold(f64::INFINITY, f64::min);
    let threshold = 0.5 * (max + min);
    if max == min {
        return SharedSet { dims: (0..delta.len()).collect(), threshold };
    }
    SharedSet { dims: (0..delta.len()).filter(|&i| delta[i] < threshold).collect(), threshold }
}

pub fn select_shared_set(q1: &GaussianPosterior, q2: &GaussianPosterior) -> Result<SharedSet> {
    if q1.dim() != q2.dim() {
        return Err(Error::Shape(format!("posteriors of dimension {} and {}", q1.dim(), q2.dim())));
    }
    Ok(shared_from_divergence(&symmetric_kl(&q1.mean, &q1.log_variance, &q2.mean, &q2.log_variance)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    #[default]
    ProductOfExperts,
    Arithmetic,
}

/// Averaged (mean, log-variance) of one dimension.
pub fn average_dim(kind: Averaging, m1: f64, l1: f64, m2: f64, l2: f64) -> (f64, f64) {
    match kind {
        Averaging::ProductOfExperts => {
            let (p1, p2) = ((-l1).exp(), (-l2).exp());
            let p = p1 + p2;
            ((m1 * p1 + m2 * p2) / p, -p.ln())
        }
        Averaging::Arithmetic => (0.5 * (m1 + m2), (0.5 * (l1.exp() + l2.exp())).ln()),
    }
}

/// Gradients of a scalar objective with respect to (m1, l1, m2, l2) given
/// its gradients `gm`, `gl` with respect to the averaged (mean, log-variance).
pub fn average_dim_backward(kind: Averaging, m1: f64, l1: f64, m2: f64, l2: f64, gm: f64, gl: f64) -> [f64; 4] {
    match kind {
        Averaging::ProductOfExperts => {
            let (p1, p2) = ((-l1).exp(), (-l2).exp());
            let p = p1 + p2;
            let m = (m1 * p1 + m2 * p2) / p;
            [
                gm * p1 / p,
                gm * (-p1 * (m1 - m) / p) + gl * p1 / p,
                gm * p2 / p,
                gm * (-p2 * (m2 - m) / p) + gl * p2 / p,
            ]
        }
        Averaging::Arithmetic => {
            let (v1, v2) = (l1.exp(), l2.exp());
            let v = v1 + v2;
            [0.5 * gm, gl * v1 / v, 0.5 * gm, gl * v2 / v]
        }
    }
}

/// Replaces every dimension in `shared` of both posteriors by their average.
pub fn adaptive_average(
    q1: &GaussianPosterior,
    q2: &GaussianPosterior,
    shared: &SharedSet,
    kind: Averaging,
) -> Result<(GaussianPosterior, GaussianPosterior)> {
    if q1.dim() != q2.dim() {
        return Err(Error::Shape(format!("posteriors of dimension {} and {}", q1.dim(), q2.dim())));
    }
    if let Some(&bad) = shared.dims.iter().find(|&&i| i >= q1.dim()) {
        return Err(Error::InvalidInput(format!("shared dimension {bad} out of range for {} latents", q1.dim())));
    }
    let (mut a, mut b) = (q1.clone(), q2.clone());
    for &i in &shared.dims {
        let (m, l) = average_dim(kind, q1.mean[i], q1.log_variance[i], q2.mean[i], q2.log_variance[i]);
        a.mean[i] = m;
        a.log_variance[i] = l;
        b.mean[i] = m;
        b.log_variance[i] = l;
    }
    Ok((a, b))
}
