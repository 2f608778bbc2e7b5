//! Weak-supervision pairs: two samples differing in exactly `k` concepts.

use rand::Rng;

use crate::dataset::generate::Sample;
use crate::dataset::render::render;
use crate::dataset::schema::{ConceptSchema, ConceptVector};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PairSample {
    pub first: Sample,
    pub second: Sample,
    pub k: usize,
}

fn varying_concepts(schema: &ConceptSchema) -> Vec<usize> {
    schema
        .cardinalities()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= 2)
        .map(|(i, _)| i)
        .collect()
}

/// Resamples `k` distinct non-degenerate concepts of `first` to new values.
pub fn perturb_concepts<G: Rng + ?Sized>(
    schema: &ConceptSchema,
    first: &ConceptVector,
    k: usize,
    rng: &mut G,
) -> Result<ConceptVector> {
    schema.check(first)?;
    let varying = varying_concepts(schema);
    if k == 0 || k > varying.len() {
        return Err(Error::InvalidPair(format!(
            "k = {k} but only {} concepts have more than one value",
            varying.len()
        )));
    }
    let cards = schema.cardinalities();
    let mut second = first.clone();
    for pick in rand::seq::index::sample(rng, varying.len(), k) {
        let concept = varying[pick];
        let old = first.get(concept);
        let mut new = rng.random_range(0..cards[concept] - 1);
        if new >= old {
            new += 1;
        }
        second.set(concept, new);
    }
    Ok(second)
}

/// First vector uniform over the product, second from [`perturb_concepts`].
pub fn sample_pair_concepts<G: Rng + ?Sized>(
    schema: &ConceptSchema,
    k: usize,
    rng: &mut G,
) -> Result<(ConceptVector, ConceptVector)> {
    let first = schema.index_to_concepts(rng.random_range(0..schema.total()))?;
    let second = perturb_concepts(schema, &first, k, rng)?;
    Ok((first, second))
}

pub fn sample_pair<G: Rng + ?Sized>(
    schema: &ConceptSchema,
    k: usize,
    resolution: usize,
    rng: &mut G,
) -> Result<PairSample> {
    let (a, b) = sample_pair_concepts(schema, k, rng)?;
    let make = |c: ConceptVector| -> Result<Sample> {
        Ok(Sample {
            index: schema.concepts_to_index(&c)?,
            image: render(schema, &c, resolution)?,
            concepts: c,
            label: None,
        })
    };
    Ok(PairSample { first: make(a)?, second: make(b)?, k })
}
