//! Per-concept tree-ensemble classifiers over vector representations.

use serde::{Deserialize, Serialize};

use crate::dataset::ConceptVector;
use crate::error::{Error, Result};
use crate::gbt::{GbtConfig, TreeEnsemble};
use crate::nn::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptProbe {
    pub input_dim: usize,
    /// One ensemble per concept, in schema order.
    pub ensembles: Vec<TreeEnsemble>,
}

/// Fits one ensemble per concept on representations `features` (N×d).
pub fn fit_latent_probe(
    features: &Matrix<f64>,
    concepts: &[ConceptVector],
    cardinalities: &[usize],
    cfg: &GbtConfig,
) -> Result<ConceptProbe> {
    if features.rows() != concepts.len() {
        return Err(Error::Shape(format!("{} feature rows for {} concept vectors", features.rows(), concepts.len())));
    }
    let ensembles = cardinalities
        .iter()
        .enumerate()
        .map(|(k, &card)| {
            let y: Vec<usize> = concepts.iter().map(|c| c.get(k)).collect();
            TreeEnsemble::fit(features, &y, card, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConceptProbe { input_dim: features.cols(), ensembles })
}

/// Per-concept argmax predictions.
pub fn probe_predict(probe: &ConceptProbe, features: &Matrix<f64>) -> Result<Vec<ConceptVector>> {
    if features.cols() != probe.input_dim {
        return Err(Error::Shape(format!("{} features given, probe expects {}", features.cols(), probe.input_dim)));
    }
    let per_concept = probe.ensembles.iter().map(|e| e.predict(features)).collect::<Result<Vec<_>>>()?;
    Ok((0..features.rows()).map(|r| ConceptVector::new(per_concept.iter().map(|p| p[r]).collect())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_problem(n: usize, d: usize, cards: &[usize], seed: u64) -> (Matrix<f64>, Vec<ConceptVector>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
        let c = (0..n).map(|_| ConceptVector::new(cards.iter().map(|&k| rng.random_range(0..k)).collect())).collect();
        (x, c)
    }

    #[test]
    fn memorizes_tiny_set() {
        let cards = [3, 6, 8];
        let (x, c) = random_problem(100, 6, &cards, 0);
        let cfg = GbtConfig { max_depth: 8, n_rounds: 100, learning_rate: 0.3, ..Default::default() };
        let probe = fit_latent_probe(&x, &c, &cards, &cfg).unwrap();
        let pred = probe_predict(&probe, &x).unwrap();
        for k in 0..cards.len() {
            let hits = pred.iter().zip(&c).filter(|(p, t)| p.get(k) == t.get(k)).count();
            assert!(hits >= 99, "concept {k}: {hits}");
        }
    }

    #[test]
    fn single_valued_concept_gets_constant_predictor() {
        let (x, mut c) = random_problem(20, 2, &[1, 2], 1);
        c.iter_mut().for_each(|v| v.set(0, 0));
        let probe = fit_latent_probe(&x, &c, &[1, 2], &GbtConfig { n_rounds: 5, ..Default::default() }).unwrap();
        assert!(probe.ensembles[0].is_constant());
        assert!(probe_predict(&probe, &x).unwrap().iter().all(|p| p.get(0) == 0));
    }

    #[test]
    fn dimension_mismatch() {
        let (x, c) = random_problem(10, 3, &[2], 2);
        let probe = fit_latent_probe(&x, &c, &[2], &GbtConfig { n_rounds: 2, ..Default::default() }).unwrap();
        assert!(probe_predict(&probe, &Matrix::zeros(1, 4)).is_err());
        assert!(fit_latent_probe(&x, &c[..5], &[2], &GbtConfig::default()).is_err());
    }
}
