//! Multi-task concept bottleneck models: one softmax head per concept on a
//! shared trunk, followed by a label predictor over the concatenated heads.

use serde::{Deserialize, Serialize};

use crate::dataset::ConceptVector;
use crate::error::{Error, Result};
use crate::models::Backbone;
use crate::nn::loss::{segment_softmax, segment_softmax_backward, sparse_ce};
use crate::nn::{
    argmax, check_finite, train_supervised, Activation, BatchSchedule, LossKind, Matrix, Network, NetworkSpec,
    Optimizer, Real, Shape3, Targets, TrainConfig, TrainReport,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    #[default]
    Independent,
    Sequential,
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CbmConfig {
    pub regime: Regime,
    /// Weight of the concept loss in the joint regime.
    pub lambda: f64,
    pub backbone: Backbone,
    pub label_hidden: Vec<usize>,
    /// Steps for the label predictor in the independent and sequential regimes.
    pub label_steps: usize,
}

impl Default for CbmConfig {
    fn default() -> Self {
        Self { regime: Regime::Independent, lambda: 1.0, backbone: Backbone::default(), label_hidden: vec![32], label_steps: 500 }
    }
}

#[derive(Clone, Debug)]
pub struct CbModel<R> {
    /// Image to concatenated per-concept logits.
    pub concept_net: Network<R>,
    /// Concatenated per-concept probabilities to label logits.
    pub label_net: Network<R>,
    pub segments: Vec<usize>,
    pub regime: Regime,
    pub lambda: f64,
}

fn flatten(concepts: &[ConceptVector]) -> Vec<usize> {
    concepts.iter().flat_map(|c| c.as_slice().iter().copied()).collect()
}

/// One-hot encoding of ground-truth concepts, laid out like the heads.
pub fn one_hot<R: Real>(concepts: &[ConceptVector], segments: &[usize]) -> Matrix<R> {
    let w: usize = segments.iter().sum();
    let mut m = Matrix::zeros(concepts.len(), w);
    for (r, c) in concepts.iter().enumerate() {
        let mut start = 0;
        for (k, &len) in segments.iter().enumerate() {
            m.row_mut(r)[start + c.get(k)] = R::one();
            start += len;
        }
    }
    m
}

impl<R: Real> CbModel<R> {
    pub fn new(input: Shape3, segments: &[usize], num_classes: usize, cfg: &CbmConfig, seed: u64) -> Result<Self> {
        if cfg.lambda < 0.0 || !cfg.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be finite and >= 0, got {}", cfg.lambda)));
        }
        let width: usize = segments.iter().sum();
        Ok(Self {
            concept_net: Network::new(cfg.backbone.spec(input, width), seed)?,
            label_net: Network::new(
                NetworkSpec::classifier_head(width, &cfg.label_hidden, num_classes, Activation::Relu),
                seed.wrapping_add(0x1AB3_1000),
            )?,
            segments: segments.to_vec(),
            regime: cfg.regime,
            lambda: cfg.lambda,
        })
    }

    /// Per-head probabilities, concatenated (N × Σ cardinalities).
    pub fn predict_concept_probs(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        let logits = self.concept_net.forward(x)?;
        let mut out = logits.clone();
        for r in 0..logits.rows() {
            out.row_mut(r).copy_from_slice(&segment_softmax(logits.row(r), &self.segments));
        }
        Ok(out)
    }

    /// Per-head probability vectors for every row.
    pub fn predict_concepts(&self, x: &Matrix<R>) -> Result<Vec<Vec<Vec<f64>>>> {
        let p = self.predict_concept_probs(x)?;
        Ok((0..p.rows())
            .map(|r| {
                let mut start = 0;
                self.segments
                    .iter()
                    .map(|&len| {
                        let v = p.row(r)[start..start + len].iter().map(|v| v.f64()).collect();
                        start += len;
                        v
                    })
                    .collect()
            })
            .collect())
    }

    pub fn predict_concept_indices(&self, x: &Matrix<R>) -> Result<Vec<ConceptVector>> {
        let p = self.predict_concept_probs(x)?;
        Ok((0..p.rows()).map(|r| head_argmax(p.row(r), &self.segments)).collect())
    }

    /// Label distribution from the concatenated head outputs.
    pub fn predict_label(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        self.label_from_concepts(&self.predict_concept_probs(x)?)
    }

    pub fn label_from_concepts(&self, probs: &Matrix<R>) -> Result<Matrix<R>> {
        let logits = self.label_net.forward(probs)?;
        let mut out = logits.clone();
        for r in 0..logits.rows() {
            out.row_mut(r).copy_from_slice(&segment_softmax(logits.row(r), &[logits.cols()]));
        }
        Ok(out)
    }

    /// Joint objective L_y + λ·L_c on a batch, averaged over rows, with its
    /// gradients for (concept_net, label_net).
    pub fn joint_loss_and_grads(
        &self,
        x: &Matrix<R>,
        concepts: &[usize],
        labels: &[usize],
    ) -> Result<(f64, f64, Vec<R>, Vec<R>)> {
        let n = x.rows();
        let k = self.segments.len();
        let w: usize = self.segments.iter().sum();
        let scale = R::one() / R::of(n.max(1) as f64);
        let ctape = self.concept_net.forward_train(x)?;
        let logits = ctape.output();
        let mut probs = Vec::with_capacity(n * w);
        for r in 0..n {
            probs.extend(segment_softmax(&logits[r * w..(r + 1) * w], &self.segments));
        }
        let ltape = self.label_net.forward_train(&Matrix::from_vec(n, w, probs.clone())?)?;
        let classes = self.label_net.output_width();
        let lout = ltape.output();
        let mut g_label_out = vec![R::zero(); n * classes];
        let mut task_loss = R::zero();
        for r in 0..n {
            task_loss += sparse_ce(&lout[r * classes..(r + 1) * classes], &[classes], &labels[r..r + 1], &mut g_label_out[r * classes..(r + 1) * classes]);
        }
        g_label_out.iter_mut().for_each(|g| *g *= scale);
        let mut g_label = vec![R::zero(); self.label_net.param_count()];
        let g_probs = self.label_net.backward(&ltape, &g_label_out, &mut g_label, true).expect("input gradient");
        let mut g_logits = vec![R::zero(); n * w];
        let mut concept_loss = R::zero();
        let lambda = R::of(self.lambda);
        let mut g_c = vec![R::zero(); w];
        for r in 0..n {
            let span = r * w..(r + 1) * w;
            segment_softmax_backward(&probs[span.clone()], &g_probs[span.clone()], &self.segments, &mut g_logits[span.clone()]);
            concept_loss += sparse_ce(&logits[span.clone()], &self.segments, &concepts[r * k..(r + 1) * k], &mut g_c);
            if self.lambda != 0.0 {
                for (g, &c) in g_logits[span].iter_mut().zip(&g_c) {
                    *g += lambda * c * scale;
                }
            }
        }
        let mut g_concept = vec![R::zero(); self.concept_net.param_count()];
        self.concept_net.backward(&ctape, &g_logits, &mut g_concept, false);
        Ok(((task_loss * scale).f64(), (concept_loss * scale).f64(), g_concept, g_label))
    }
}

/// Argmax within every head.
pub fn head_argmax<R: Real>(row: &[R], segments: &[usize]) -> ConceptVector {
    let mut start = 0;
    ConceptVector::new(
        segments
            .iter()
            .map(|&len| {
                let a = argmax(&row[start..start + len]);
                start += len;
                a
            })
            .collect(),
    )
}

fn check_data<R: Real>(x: &Matrix<R>, concepts: &[ConceptVector], labels: &[usize], segments: &[usize]) -> Result<()> {
    if concepts.len() != x.rows() || labels.len() != x.rows() {
        return Err(Error::Shape(format!("{} images, {} concept vectors, {} labels", x.rows(), concepts.len(), labels.len())));
    }
    for c in concepts {
        if c.len() != segments.len() {
            return Err(Error::InvalidConcepts(format!("every sample needs {} concept annotations, got {}", segments.len(), c.len())));
        }
    }
    Ok(())
}

/// Trains a CBM under its configured regime. `hook` observes the concept
/// predictor every `cfg.eval_every` steps of concept training.
pub fn train_cbm<R: Real>(
    model: &mut CbModel<R>,
    x: &Matrix<R>,
    concepts: &[ConceptVector],
    labels: &[usize],
    cfg: &TrainConfig,
    label_steps: usize,
    hook: &mut dyn FnMut(usize, &Network<R>) -> Result<()>,
) -> Result<TrainReport> {
    check_data(x, concepts, labels, &model.segments)?;
    let flat = flatten(concepts);
    let label_cfg = TrainConfig { epochs: 0, min_steps: label_steps.max(1), seed: cfg.seed.wrapping_add(1), ..cfg.clone() };
    let classes = model.label_net.output_width();
    match model.regime {
        Regime::Independent | Regime::Sequential => {
            let targets = Targets::Classes { segments: model.segments.clone(), labels: flat };
            let report = train_supervised(&mut model.concept_net, x, &targets, LossKind::SparseCategoricalCe, cfg, hook)?;
            let inputs = match model.regime {
                Regime::Independent => one_hot(concepts, &model.segments),
                _ => model.predict_concept_probs(x)?,
            };
            train_supervised(
                &mut model.label_net,
                &inputs,
                &Targets::single(classes, labels.to_vec()),
                LossKind::SparseCategoricalCe,
                &label_cfg,
                &mut |_, _| Ok(()),
            )?;
            Ok(report)
        }
        Regime::Joint => {
            cfg.validate()?;
            let k = model.segments.len();
            let mut oc = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.concept_net.param_count());
            let mut ol = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.label_net.param_count());
            let mut report = TrainReport::default();
            for (step, batch) in BatchSchedule::new(x.rows(), cfg).enumerate() {
                let step = step + 1;
                let xb = x.gather_rows(&batch);
                let cb: Vec<usize> = batch.iter().flat_map(|&i| flat[i * k..(i + 1) * k].iter().copied()).collect();
                let lb: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
                let (lt, lc, gc, gl) = model.joint_loss_and_grads(&xb, &cb, &lb)?;
                let total = lt + model.lambda * lc;
                check_finite(total, step, "joint cbm")?;
                oc.step(model.concept_net.params_mut(), &gc);
                ol.step(model.label_net.params_mut(), &gl);
                report.losses.push((step, total));
                if step % cfg.eval_every == 0 {
                    hook(step, &model.concept_net)?;
                }
            }
            Ok(report)
        }
    }
}
