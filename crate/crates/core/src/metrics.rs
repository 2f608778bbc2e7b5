//! Concept accuracy and indexed metric series.

use serde::{Deserialize, Serialize};

use crate::dataset::ConceptVector;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptAccuracy {
    pub per_concept: Vec<f64>,
    /// Unweighted mean over concepts.
    pub average: f64,
}

impl ConceptAccuracy {
    /// Mean over the selected concepts only.
    pub fn average_over(&self, concepts: &[usize]) -> f64 {
        if concepts.is_empty() {
            return f64::NAN;
        }
        concepts.iter().map(|&k| self.per_concept[k]).sum::<f64>() / concepts.len() as f64
    }
}

pub fn concept_accuracy(predictions: &[ConceptVector], truth: &[ConceptVector]) -> Result<ConceptAccuracy> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!("{} predictions for {} targets", predictions.len(), truth.len())));
    }
    let k = truth[0].len();
    if predictions.iter().chain(truth).any(|c| c.len() != k) {
        return Err(Error::Shape("concept vectors of different lengths".into()));
    }
    let mut hits = vec![0usize; k];
    for (p, t) in predictions.iter().zip(truth) {
        for (j, h) in hits.iter_mut().enumerate() {
            *h += (p.get(j) == t.get(j)) as usize;
        }
    }
    let per_concept: Vec<f64> = hits.iter().map(|&h| h as f64 / truth.len() as f64).collect();
    let average = per_concept.iter().sum::<f64>() / k.max(1) as f64;
    Ok(ConceptAccuracy { per_concept, average })
}

pub fn label_accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predictions.len(), truth.len())));
    }
    Ok(predictions.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64)
}

/// Accuracy records of one (experiment, method, setup, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub experiment: String,
    pub method: String,
    pub dataset: String,
    /// Task or loudness-setup name; empty when not applicable.
    pub setup: String,
    pub seed: u64,
    pub schema_hash: String,
    /// What the index counts: "fraction", "step" or "labelled_fraction".
    pub index_kind: String,
    pub concepts: Vec<String>,
    pub index: Vec<f64>,
    /// One row of per-concept accuracies per index point.
    pub per_concept: Vec<Vec<f64>>,
    pub average: Vec<f64>,
    pub task: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn new(experiment: &str, method: &str, dataset: &str, setup: &str, seed: u64, schema_hash: &str, index_kind: &str, concepts: Vec<String>) -> Self {
        Self {
            experiment: experiment.into(),
            method: method.into(),
            dataset: dataset.into(),
            setup: setup.into(),
            seed,
            schema_hash: schema_hash.into(),
            index_kind: index_kind.into(),
            concepts,
            index: Vec::new(),
            per_concept: Vec::new(),
            average: Vec::new(),
            task: Vec::new(),
        }
    }

    pub fn push(&mut self, index: f64, per_concept: Vec<f64>, task: Option<f64>) -> Result<()> {
        if self.index.last().is_some_and(|&last| index <= last) {
            return Err(Error::InvalidInput(format!("series index {index} does not increase")));
        }
        if per_concept.len() != self.concepts.len() {
            return Err(Error::Shape(format!("{} accuracies for {} concepts", per_concept.len(), self.concepts.len())));
        }
        if per_concept.iter().chain(task.iter()).any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput("accuracies must lie in [0, 1]".into()));
        }
        self.average.push(per_concept.iter().sum::<f64>() / per_concept.len().max(1) as f64);
        self.index.push(index);
        self.per_concept.push(per_concept);
        self.task.push(task);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn concept(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c == name)
    }

    /// Last recorded accuracy of a concept.
    pub fn final_accuracy(&self, name: &str) -> Option<f64> {
        Some(self.per_concept.last()?[self.concept(name)?])
    }
}
