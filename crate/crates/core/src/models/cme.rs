//! Post-hoc concept extraction from the hidden layer of a trained task model.

use serde::{Deserialize, Serialize};

use crate::dataset::ConceptVector;
use crate::error::{Error, Result};
use crate::gbt::{GbtConfig, TreeEnsemble};
use crate::models::probe::{fit_latent_probe, probe_predict, ConceptProbe};
use crate::nn::{Matrix, Network, Real};

/// Activations of `source` after layer `layer_id`.
pub fn extract_features<R: Real>(source: &Network<R>, layer_id: usize, x: &Matrix<R>) -> Result<Matrix<f64>> {
    Ok(source.forward_to(x, layer_id)?.cast())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmeModel {
    pub layer_id: usize,
    /// Concept predictors over the tapped features.
    pub concepts: ConceptProbe,
    /// Label predictor over hard predicted concept indices.
    pub label: TreeEnsemble,
    pub labelled_count: usize,
    /// `labelled_count` relative to the size of the full training set.
    pub labelled_fraction: f64,
}

fn as_features(cs: &[ConceptVector]) -> Result<Matrix<f64>> {
    let k = cs.first().map_or(0, ConceptVector::len);
    Matrix::from_vec(cs.len(), k, cs.iter().flat_map(|c| c.as_slice().iter().map(|&v| v as f64)).collect())
}

/// Fits per-concept ensembles on the labelled subset and a label ensemble
/// on the predicted concepts of the whole training set.
#[allow(clippy::too_many_arguments)]
pub fn train_cme<R: Real>(
    source: &Network<R>,
    layer_id: usize,
    labelled_x: &Matrix<R>,
    labelled_concepts: &[ConceptVector],
    full_x: &Matrix<R>,
    full_labels: &[usize],
    cardinalities: &[usize],
    num_classes: usize,
    gbt: &GbtConfig,
) -> Result<CmeModel> {
    if labelled_x.rows() == 0 {
        return Err(Error::InvalidInput("CME needs a non-empty labelled set".into()));
    }
    if full_labels.len() != full_x.rows() {
        return Err(Error::Shape(format!("{} task labels for {} images", full_labels.len(), full_x.rows())));
    }
    let features = extract_features(source, layer_id, labelled_x)?;
    for (k, &card) in cardinalities.iter().enumerate() {
        let first = labelled_concepts.first().map(|c| c.get(k));
        if card > 1 && labelled_concepts.iter().all(|c| Some(c.get(k)) == first) {
            log::warn!("concept {k} takes a single value in the labelled set; its predictor is constant");
        }
    }
    let concepts = fit_latent_probe(&features, labelled_concepts, cardinalities, gbt)?;
    let predicted = probe_predict(&concepts, &extract_features(source, layer_id, full_x)?)?;
    let label = TreeEnsemble::fit(&as_features(&predicted)?, full_labels, num_classes, gbt)?;
    Ok(CmeModel {
        layer_id,
        concepts,
        label,
        labelled_count: labelled_x.rows(),
        labelled_fraction: labelled_x.rows() as f64 / full_x.rows().max(1) as f64,
    })
}

impl CmeModel {
    pub fn predict_concepts<R: Real>(&self, source: &Network<R>, x: &Matrix<R>) -> Result<Vec<ConceptVector>> {
        probe_predict(&self.concepts, &extract_features(source, self.layer_id, x)?)
    }

    pub fn predict_label<R: Real>(&self, source: &Network<R>, x: &Matrix<R>) -> Result<Vec<usize>> {
        self.label.predict(&as_features(&self.predict_concepts(source, x)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{train_supervised, Activation, LossKind, NetworkSpec, Targets, TrainConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn extracts_from_a_trained_source() {
        // Concept a drives the label; concept b is noise to the source.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 300;
        let mut rows = Vec::new();
        let mut cs = Vec::new();
        for _ in 0..n {
            let (a, b) = (rng.random_range(0..3usize), rng.random_range(0..4usize));
            let mut row: Vec<f32> = (0..8).map(|_| rng.random_range(-0.1..0.1)).collect();
            row[a] += 1.0;
            row[4 + b] += 0.05;
            rows.push(row);
            cs.push(ConceptVector::new(vec![a, b]));
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<usize> = cs.iter().map(|c| c.get(0)).collect();
        let mut net = Network::new(NetworkSpec::mlp(8, &[16], 3, Activation::Relu), 1).unwrap();
        let tc = TrainConfig { learning_rate: 0.01, batch_size: 32, epochs: 30, ..Default::default() };
        train_supervised(&mut net, &x, &Targets::single(3, y.clone()), LossKind::SparseCategoricalCe, &tc, &mut |_, _| Ok(())).unwrap();
        let layer = net.penultimate_layer().unwrap();
        let f1 = extract_features(&net, layer, &x).unwrap();
        assert_eq!(f1, extract_features(&net, layer, &x).unwrap());
        assert_eq!(f1.cols(), 16);
        assert!(extract_features(&net, 99, &x).is_err());

        let gbt = GbtConfig { n_rounds: 30, ..Default::default() };
        let m = train_cme(&net, layer, &x.gather_rows(&(0..60).collect::<Vec<_>>()), &cs[..60], &x, &y, &[3, 4], 3, &gbt).unwrap();
        assert_eq!(m.labelled_count, 60);
        assert!((m.labelled_fraction - 0.2).abs() < 1e-12);
        let pc = m.predict_concepts(&net, &x).unwrap();
        let acc = |k: usize| pc.iter().zip(&cs).filter(|(p, t)| p.get(k) == t.get(k)).count() as f64 / n as f64;
        assert!(acc(0) > 0.95);
        assert!(acc(0) > acc(1));
        let pl = m.predict_label(&net, &x).unwrap();
        assert!(pl.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / n as f64 > 0.95);
    }
}
