//! Variational autoencoders: the unsupervised objective and its paired,
//! weakly-supervised variant with adaptive posterior averaging.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::gaussian::{
    average_dim, average_dim_backward, kl_standard_dim, shared_from_divergence, symmetric_kl, Averaging,
    GaussianPosterior, SharedSet,
};
use crate::nn::loss::{bernoulli_nll, gaussian_nll};
use crate::nn::{
    check_finite, Activation, BatchSchedule, Matrix, Network, NetworkSpec, Optimizer, Real, Shape3, Tape,
    TrainConfig, TrainReport,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Likelihood {
    /// Per-pixel Bernoulli; the decoder emits logits.
    Bernoulli,
    /// Per-value Gaussian with fixed variance; the decoder emits means.
    Gaussian { variance: f64 },
}

impl Likelihood {
    /// Bernoulli for single-channel images, Gaussian(0.1) otherwise.
    pub fn for_channels(channels: usize) -> Self {
        if channels == 1 {
            Likelihood::Bernoulli
        } else {
            Likelihood::Gaussian { variance: 0.1 }
        }
    }

    fn nll<R: Real>(self, out: &[R], x: &[R], grad: &mut [R]) -> R {
        match self {
            Likelihood::Bernoulli => bernoulli_nll(out, x, grad),
            Likelihood::Gaussian { variance } => gaussian_nll(out, x, variance, grad),
        }
    }

    /// Maps decoder outputs to pixel space.
    fn mean<R: Real>(self, out: R) -> R {
        match self {
            Likelihood::Bernoulli => R::one() / (R::one() + (-out).exp()),
            Likelihood::Gaussian { .. } => out,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VaeMode {
    #[default]
    Unsupervised,
    WeakPaired,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VaeConfig {
    pub latent_dim: usize,
    pub beta: f64,
    pub averaging: Averaging,
    /// Defaults to [`Likelihood::for_channels`].
    pub likelihood: Option<Likelihood>,
    /// Convolution channels; empty gives a fully connected encoder/decoder.
    pub conv_channels: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            latent_dim: 10,
            beta: 1.0,
            averaging: Averaging::ProductOfExperts,
            likelihood: None,
            conv_channels: vec![32, 32, 64, 64],
            hidden: vec![256],
        }
    }
}

impl VaeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Loss decomposition of the (negated) objective, averaged over rows.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElboTerms {
    /// Expected log-likelihood under one reparameterized sample.
    pub reconstruction: f64,
    pub kl: f64,
    /// reconstruction − β·kl.
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct VaeModel<R> {
    pub encoder: Network<R>,
    pub decoder: Network<R>,
    pub latent_dim: usize,
    pub beta: f64,
    pub likelihood: Likelihood,
    pub mode: VaeMode,
    pub averaging: Averaging,
}

/// Gradients of the negated objective, split by network.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeGrads<R> {
    pub encoder: Vec<R>,
    pub decoder: Vec<R>,
}

/// Source of paired training images for the weakly-supervised objective.
pub trait PairStream<R> {
    /// Number of distinct first elements, used to size epochs.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Two matrices of `rows.len()` images each; row i of both forms a pair.
    fn batch(&mut self, rows: &[usize]) -> Result<(Matrix<R>, Matrix<R>)>;
}

struct Forward<R> {
    enc: Tape<R>,
    dec: Tape<R>,
    /// Posterior parameters actually sampled from, per row.
    mean: Vec<f64>,
    logvar: Vec<f64>,
    eps: Vec<f64>,
}

impl<R: Real> VaeModel<R> {
    pub fn new(input: Shape3, cfg: &VaeConfig, mode: VaeMode, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.latent_dim;
        let (enc, dec) = if cfg.conv_channels.is_empty() {
            let w = input.numel();
            let mut hidden_rev = cfg.hidden.clone();
            hidden_rev.reverse();
            (
                NetworkSpec::mlp(w, &cfg.hidden, 2 * d, Activation::Relu),
                NetworkSpec { output: input, ..NetworkSpec::mlp(d, &hidden_rev, w, Activation::Relu) },
            )
        } else {
            let mut hidden_rev = cfg.hidden.clone();
            hidden_rev.reverse();
            (
                NetworkSpec::conv_encoder(input, &cfg.conv_channels, &cfg.hidden, 2 * d),
                NetworkSpec::deconv_decoder(d, &hidden_rev, &cfg.conv_channels, input),
            )
        };
        Ok(Self {
            encoder: Network::new(enc, seed)?,
            decoder: Network::new(dec, seed.wrapping_add(0x9E37_79B9))?,
            latent_dim: d,
            beta: cfg.beta,
            likelihood: cfg.likelihood.unwrap_or_else(|| Likelihood::for_channels(input.channels)),
            mode,
            averaging: cfg.averaging,
        })
    }

    pub fn from_parts(encoder: Network<R>, decoder: Network<R>, beta: f64, likelihood: Likelihood, mode: VaeMode, averaging: Averaging) -> Result<Self> {
        if encoder.output_width() % 2 != 0 || decoder.input_width() * 2 != encoder.output_width() {
            return Err(Error::Shape(format!(
                "encoder emits {} values for a decoder taking {} latents",
                encoder.output_width(),
                decoder.input_width()
            )));
        }
        if decoder.output_width() != encoder.input_width() {
            return Err(Error::Shape("decoder output does not match encoder input".into()));
        }
        Ok(Self { latent_dim: decoder.input_width(), encoder, decoder, beta, likelihood, mode, averaging })
    }

    pub fn input_width(&self) -> usize {
        self.encoder.input_width()
    }

    fn check(&self, x: &Matrix<R>) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape(format!("{} input values, model expects {}", x.cols(), self.input_width())));
        }
        Ok(())
    }

    /// Posterior for every row of `x`.
    pub fn encode(&self, x: &Matrix<R>) -> Result<Vec<GaussianPosterior>> {
        self.check(x)?;
        let h = self.encoder.forward(x)?;
        let d = self.latent_dim;
        (0..h.rows())
            .map(|r| {
                let row = h.row(r);
                GaussianPosterior::new(row[..d].iter().map(|v| v.f64()).collect(), row[d..].iter().map(|v| v.f64()).collect())
            })
            .collect()
    }

    /// Posterior means as an N×d matrix.
    pub fn encode_means(&self, x: &Matrix<R>) -> Result<Matrix<f64>> {
        self.check(x)?;
        let h = self.encoder.forward(x)?;
        let d = self.latent_dim;
        let mut out = Vec::with_capacity(h.rows() * d);
        for r in 0..h.rows() {
            out.extend(h.row(r)[..d].iter().map(|v| v.f64()));
        }
        Matrix::from_vec(h.rows(), d, out)
    }

    /// Reconstructions in pixel space for latent codes `z`.
    pub fn decode(&self, z: &Matrix<R>) -> Result<Matrix<R>> {
        let mut out = self.decoder.forward(z)?;
        let lik = self.likelihood;
        out.data_mut().iter_mut().for_each(|v| *v = lik.mean(*v));
        Ok(out)
    }

    pub fn reconstruct(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        let means = self.encode_means(x)?;
        self.decode(&means.cast())
    }

    fn sample_noise(&self, rows: usize, rng: &mut ChaCha8Rng) -> Matrix<R> {
        let data = (0..rows * self.latent_dim).map(|_| R::of(rng.sample::<f64, _>(StandardNormal))).collect();
        Matrix::from_vec(rows, self.latent_dim, data).expect("noise shape")
    }

    /// Splits encoder output into per-row (mean, log-variance).
    fn posterior_params(&self, enc: &Tape<R>) -> (Vec<f64>, Vec<f64>) {
        let d = self.latent_dim;
        let h = enc.output();
        let n = enc.rows();
        let mut m = Vec::with_capacity(n * d);
        let mut l = Vec::with_capacity(n * d);
        for r in 0..n {
            m.extend(h[r * 2 * d..r * 2 * d + d].iter().map(|v| v.f64()));
            l.extend(h[r * 2 * d + d..(r + 1) * 2 * d].iter().map(|v| v.f64()));
        }
        (m, l)
    }

    fn decode_train(&self, mean: Vec<f64>, logvar: Vec<f64>, eps: &Matrix<R>, enc: Tape<R>) -> Result<Forward<R>> {
        let n = eps.rows();
        let eps: Vec<f64> = eps.data().iter().map(|v| v.f64()).collect();
        let z: Vec<R> = (0..n * self.latent_dim).map(|i| R::of(mean[i] + (0.5 * logvar[i]).exp() * eps[i])).collect();
        let dec = self.decoder.forward_train(&Matrix::from_vec(n, self.latent_dim, z)?)?;
        Ok(Forward { enc, dec, mean, logvar, eps })
    }

    /// Summed per-row terms and the gradients of the summed loss with
    /// respect to the sampled posterior parameters, all scaled by `scale`.
    fn loss_backward(&self, f: &Forward<R>, x: &Matrix<R>, scale: f64, grads: &mut VaeGrads<R>) -> (ElboTerms, Vec<f64>, Vec<f64>) {
        let (n, w, d) = (x.rows(), x.cols(), self.latent_dim);
        let out = f.dec.output();
        let mut g_out = vec![R::zero(); n * w];
        let mut recon = 0.0;
        for r in 0..n {
            let nll = self.likelihood.nll(&out[r * w..(r + 1) * w], x.row(r), &mut g_out[r * w..(r + 1) * w]);
            recon -= nll.f64();
        }
        let s = R::of(scale);
        g_out.iter_mut().for_each(|g| *g *= s);
        let g_z = self.decoder.backward(&f.dec, &g_out, &mut grads.decoder, true).expect("input gradient");
        let mut kl = 0.0;
        let mut g_m = vec![0.0; n * d];
        let mut g_l = vec![0.0; n * d];
        for i in 0..n * d {
            let (m, l, e) = (f.mean[i], f.logvar[i], f.eps[i]);
            kl += kl_standard_dim(m, l);
            let gz = g_z[i].f64();
            let sd = (0.5 * l).exp();
            g_m[i] = gz + scale * self.beta * m;
            g_l[i] = gz * e * 0.5 * sd + scale * self.beta * 0.5 * (l.exp() - 1.0);
        }
        let terms = ElboTerms { reconstruction: recon * scale, kl: kl * scale, total: (recon - self.beta * kl) * scale };
        (terms, g_m, g_l)
    }

    fn encoder_backward(&self, enc: &Tape<R>, g_m: &[f64], g_l: &[f64], grads: &mut VaeGrads<R>) {
        let d = self.latent_dim;
        let n = enc.rows();
        let mut g_h = vec![R::zero(); n * 2 * d];
        for r in 0..n {
            for j in 0..d {
                g_h[r * 2 * d + j] = R::of(g_m[r * d + j]);
                g_h[r * 2 * d + d + j] = R::of(g_l[r * d + j]);
            }
        }
        self.encoder.backward(enc, &g_h, &mut grads.encoder, false);
    }

    pub fn zero_grads(&self) -> VaeGrads<R> {
        VaeGrads { encoder: vec![R::zero(); self.encoder.param_count()], decoder: vec![R::zero(); self.decoder.param_count()] }
    }

    /// Objective averaged over the rows of `x` with explicit noise, and the
    /// gradients of its negation.
    pub fn elbo_with_noise(&self, x: &Matrix<R>, eps: &Matrix<R>) -> Result<(ElboTerms, VaeGrads<R>)> {
        self.check(x)?;
        let enc = self.encoder.forward_train(x)?;
        let (m, l) = self.posterior_params(&enc);
        let f = self.decode_train(m, l, eps, enc)?;
        let mut grads = self.zero_grads();
        let (terms, g_m, g_l) = self.loss_backward(&f, x, 1.0 / x.rows().max(1) as f64, &mut grads);
        self.encoder_backward(&f.enc, &g_m, &g_l, &mut grads);
        Ok((terms, grads))
    }

    /// Single-sample estimate of the objective averaged over `x`.
    pub fn elbo(&self, x: &Matrix<R>, seed: u64) -> Result<ElboTerms> {
        let eps = self.sample_noise(x.rows(), &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(self.elbo_with_noise(x, &eps)?.0)
    }

    /// Paired objective: sum of both views' objectives after averaging the
    /// shared latent dimensions, averaged over pairs. `force_empty` skips
    /// averaging, reducing it to two independent unsupervised terms.
    pub fn paired_elbo_with_noise(
        &self,
        x1: &Matrix<R>,
        x2: &Matrix<R>,
        eps1: &Matrix<R>,
        eps2: &Matrix<R>,
        force_empty: bool,
    ) -> Result<(ElboTerms, VaeGrads<R>, Vec<SharedSet>)> {
        self.check(x1)?;
        self.check(x2)?;
        if x1.rows() != x2.rows() {
            return Err(Error::Shape("paired batches differ in length".into()));
        }
        let n = x1.rows();
        let d = self.latent_dim;
        let stacked = Matrix::from_vec(2 * n, x1.cols(), [x1.data(), x2.data()].concat())?;
        let enc = self.encoder.forward_train(&stacked)?;
        let (m, l) = self.posterior_params(&enc);
        let (mut mh, mut lh) = (m.clone(), l.clone());
        let mut shared = Vec::with_capacity(n);
        for p in 0..n {
            let (a, b) = (p * d, (n + p) * d);
            let s = if force_empty {
                SharedSet::empty()
            } else {
                shared_from_divergence(&symmetric_kl(&m[a..a + d], &l[a..a + d], &m[b..b + d], &l[b..b + d]))
            };
            for &i in &s.dims {
                let (am, al) = average_dim(self.averaging, m[a + i], l[a + i], m[b + i], l[b + i]);
                mh[a + i] = am;
                lh[a + i] = al;
                mh[b + i] = am;
                lh[b + i] = al;
            }
            shared.push(s);
        }
        let eps = Matrix::from_vec(2 * n, d, [eps1.data(), eps2.data()].concat())?;
        let f = self.decode_train(mh, lh, &eps, enc)?;
        let mut grads = self.zero_grads();
        let (terms, g_mh, g_lh) = self.loss_backward(&f, &stacked, 1.0 / n.max(1) as f64, &mut grads);
        let (mut g_m, mut g_l) = (g_mh.clone(), g_lh.clone());
        for (p, s) in shared.iter().enumerate() {
            let (a, b) = (p * d, (n + p) * d);
            for &i in &s.dims {
                let (gm, gl) = (g_mh[a + i] + g_mh[b + i], g_lh[a + i] + g_lh[b + i]);
                let g = average_dim_backward(self.averaging, m[a + i], l[a + i], m[b + i], l[b + i], gm, gl);
                g_m[a + i] = g[0];
                g_l[a + i] = g[1];
                g_m[b + i] = g[2];
                g_l[b + i] = g[3];
            }
        }
        self.encoder_backward(&f.enc, &g_m, &g_l, &mut grads);
        Ok((terms, grads, shared))
    }

    /// Mean per-pixel absolute reconstruction error of the posterior means.
    pub fn reconstruction_error(&self, x: &Matrix<R>) -> Result<f64> {
        let rec = self.reconstruct(x)?;
        Ok(rec.data().iter().zip(x.data()).map(|(a, b)| (a.f64() - b.f64()).abs()).sum::<f64>() / x.data().len().max(1) as f64)
    }
}

struct Optimizers<R> {
    enc: Optimizer<R>,
    dec: Optimizer<R>,
}

impl<R: Real> Optimizers<R> {
    fn new(m: &VaeModel<R>, cfg: &TrainConfig) -> Self {
        Self {
            enc: Optimizer::new(cfg.optimizer, cfg.learning_rate, m.encoder.param_count()),
            dec: Optimizer::new(cfg.optimizer, cfg.learning_rate, m.decoder.param_count()),
        }
    }

    fn step(&mut self, m: &mut VaeModel<R>, g: &VaeGrads<R>) {
        self.enc.step(m.encoder.params_mut(), &g.encoder);
        self.dec.step(m.decoder.params_mut(), &g.decoder);
    }
}

/// Maximizes the unsupervised objective on the rows of `data`. The report
/// records the negated objective per step.
pub fn train_vae<R: Real>(
    model: &mut VaeModel<R>,
    data: &Matrix<R>,
    cfg: &TrainConfig,
    hook: &mut dyn FnMut(usize, &VaeModel<R>) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    model.check(data)?;
    let mut opt = Optimizers::new(model, cfg);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00E1_B0E5);
    let mut report = TrainReport::default();
    for (step, batch) in BatchSchedule::new(data.rows(), cfg).enumerate() {
        let step = step + 1;
        let x = data.gather_rows(&batch);
        let eps = model.sample_noise(x.rows(), &mut noise);
        let (terms, grads) = model.elbo_with_noise(&x, &eps)?;
        check_finite(terms.total, step, "vae")?;
        opt.step(model, &grads);
        report.losses.push((step, -terms.total));
        if step % cfg.eval_every == 0 {
            hook(step, model)?;
        }
    }
    Ok(report)
}

/// Maximizes the paired objective over batches drawn from `pairs`.
pub fn train_wvae<R: Real>(
    model: &mut VaeModel<R>,
    pairs: &mut dyn PairStream<R>,
    cfg: &TrainConfig,
    hook: &mut dyn FnMut(usize, &VaeModel<R>) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidInput("empty pair stream".into()));
    }
    let mut opt = Optimizers::new(model, cfg);
    let mut noise = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00E1_B0E5);
    let mut report = TrainReport::default();
    for (step, batch) in BatchSchedule::new(pairs.len(), cfg).enumerate() {
        let step = step + 1;
        let (x1, x2) = pairs.batch(&batch)?;
        let e1 = model.sample_noise(x1.rows(), &mut noise);
        let e2 = model.sample_noise(x2.rows(), &mut noise);
        let (terms, grads, _) = model.paired_elbo_with_noise(&x1, &x2, &e1, &e2, false)?;
        check_finite(terms.total, step, "paired vae")?;
        opt.step(model, &grads);
        report.losses.push((step, -terms.total));
        if step % cfg.eval_every == 0 {
            hook(step, model)?;
        }
    }
    Ok(report)
}
