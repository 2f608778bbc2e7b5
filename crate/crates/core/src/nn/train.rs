//! Minibatch training loop for supervised networks.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::loss::{mse, sparse_ce};
use crate::nn::optim::{Optimizer, OptimizerKind};
use crate::nn::{Matrix, Network, Real};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Lower bound on optimizer steps, for very small training sets.
    pub min_steps: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            epochs: 10,
            min_steps: 0,
            optimizer: OptimizerKind::AdaptiveMoment,
            seed: 0,
            eval_every: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be finite and >= 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.epochs == 0 && self.min_steps == 0 {
            return Err(Error::Config("epochs or min_steps must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be positive".into()));
        }
        Ok(())
    }

    pub fn steps_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size).max(1)
    }

    pub fn total_steps(&self, n: usize) -> usize {
        (self.epochs * self.steps_per_epoch(n)).max(self.min_steps)
    }
}

/// Seeded minibatch order: a fresh permutation per epoch, the last batch
/// of an epoch possibly short.
pub struct BatchSchedule {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    batch: usize,
    pos: usize,
    remaining: usize,
}

impl BatchSchedule {
    pub fn new(n: usize, cfg: &TrainConfig) -> Self {
        Self::with_steps(n, cfg.batch_size, cfg.total_steps(n), cfg.seed)
    }

    pub fn with_steps(n: usize, batch: usize, steps: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_BA7C),
            order: (0..n).collect(),
            batch,
            pos: n,
            remaining: if n == 0 { 0 } else { steps },
        }
    }
}

impl Iterator for BatchSchedule {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        if self.pos >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let end = (self.pos + self.batch).min(self.order.len());
        let out = self.order[self.pos..end].to_vec();
        self.pos = end;
        self.remaining -= 1;
        Some(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SparseCategoricalCe,
    Mse,
}

/// Supervision for [`train_supervised`].
#[derive(Clone, Debug)]
pub enum Targets<R> {
    /// One class index per segment per row (`labels.len() == rows * segments.len()`).
    Classes { segments: Vec<usize>, labels: Vec<usize> },
    Values(Matrix<R>),
}

impl<R: Real> Targets<R> {
    pub fn single(classes: usize, labels: Vec<usize>) -> Self {
        Targets::Classes { segments: vec![classes], labels }
    }

    fn rows(&self) -> usize {
        match self {
            Targets::Classes { segments, labels } => labels.len() / segments.len().max(1),
            Targets::Values(m) => m.rows(),
        }
    }

    fn check(&self, loss: LossKind, output_width: usize) -> Result<()> {
        match (self, loss) {
            (Targets::Classes { segments, labels }, LossKind::SparseCategoricalCe) => {
                if segments.iter().sum::<usize>() != output_width {
                    return Err(Error::Shape(format!(
                        "class segments {segments:?} do not cover output width {output_width}"
                    )));
                }
                for row in labels.chunks(segments.len()) {
                    for (&l, &s) in row.iter().zip(segments) {
                        if l >= s {
                            return Err(Error::InvalidInput(format!("label {l} out of range for {s} classes")));
                        }
                    }
                }
                Ok(())
            }
            (Targets::Values(m), LossKind::Mse) if m.cols() == output_width => Ok(()),
            (Targets::Values(_), LossKind::Mse) => Err(Error::Shape("regression target width".into())),
            _ => Err(Error::InvalidInput(format!("targets do not match loss {loss:?}"))),
        }
    }

    /// Mean loss over `rows` and the output gradient of that mean.
    pub fn loss_and_grad(&self, loss: LossKind, output: &Matrix<R>, rows: &[usize]) -> (R, Vec<R>) {
        let w = output.cols();
        let mut grad = vec![R::zero(); output.rows() * w];
        let mut total = R::zero();
        for (r, &i) in rows.iter().enumerate() {
            let g = &mut grad[r * w..(r + 1) * w];
            total += match (self, loss) {
                (Targets::Classes { segments, labels }, _) => {
                    let k = segments.len();
                    sparse_ce(output.row(r), segments, &labels[i * k..(i + 1) * k], g)
                }
                (Targets::Values(m), _) => mse(output.row(r), m.row(i), g),
            };
        }
        let scale = R::one() / R::of(rows.len().max(1) as f64);
        grad.iter_mut().for_each(|v| *v *= scale);
        (total * scale, grad)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// (step, mean minibatch loss), steps counted from 1.
    pub losses: Vec<(usize, f64)>,
}

impl TrainReport {
    pub fn steps(&self) -> usize {
        self.losses.len()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.losses.last().map(|&(_, l)| l)
    }

    /// Mean of the last `window` recorded losses.
    pub fn tail_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.losses.len().max(1));
        let tail = &self.losses[self.losses.len().saturating_sub(w)..];
        tail.iter().map(|&(_, l)| l).sum::<f64>() / tail.len().max(1) as f64
    }
}

pub(crate) fn check_finite(loss: f64, step: usize, what: &str) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} loss became {loss} at step {step}")))
    }
}

/// Trains `net` on (inputs, targets). `hook` runs after every
/// `cfg.eval_every` steps with the step index.
pub fn train_supervised<R: Real>(
    net: &mut Network<R>,
    inputs: &Matrix<R>,
    targets: &Targets<R>,
    loss: LossKind,
    cfg: &TrainConfig,
    hook: &mut dyn FnMut(usize, &Network<R>) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if targets.rows() != inputs.rows() {
        return Err(Error::Shape(format!("{} targets for {} inputs", targets.rows(), inputs.rows())));
    }
    targets.check(loss, net.output_width())?;
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, net.param_count());
    let mut grads = vec![R::zero(); net.param_count()];
    let mut report = TrainReport::default();
    for (step, batch) in BatchSchedule::new(inputs.rows(), cfg).enumerate() {
        let step = step + 1;
        let x = inputs.gather_rows(&batch);
        let tape = net.forward_train(&x)?;
        let (l, g) = targets.loss_and_grad(loss, &tape.output_matrix(), &batch);
        check_finite(l.f64(), step, "training")?;
        grads.fill(R::zero());
        net.backward(&tape, &g, &mut grads, false);
        opt.step(net.params_mut(), &grads);
        report.losses.push((step, l.f64()));
        if step % cfg.eval_every == 0 {
            hook(step, net)?;
        }
    }
    Ok(report)
}

/// Row-wise argmax.
pub fn argmax_rows<R: Real>(m: &Matrix<R>) -> Vec<usize> {
    (0..m.rows()).map(|r| argmax(m.row(r))).collect()
}

pub fn argmax<R: Real>(v: &[R]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
