use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{
    generate_indices, perturb_concepts, render, stratified_split, stride_indices, ConceptSchema, ConceptVector,
};
use crate::error::{Error, Result};
use crate::models::PairStream;
use crate::nn::{Matrix, Shape3};

/// A stride-subsampled grid split into training and held-out parts.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub schema: ConceptSchema,
    pub resolution: usize,
    pub input: Shape3,
    pub train_x: Matrix<f32>,
    pub train_c: Vec<ConceptVector>,
    /// Row-major schema index of every training row.
    pub train_index: Vec<usize>,
    pub eval_x: Matrix<f32>,
    pub eval_c: Vec<ConceptVector>,
    pub eval_index: Vec<usize>,
    /// Concepts with more than one value; only these are scored.
    pub varying: Vec<usize>,
}

pub fn prepare(
    schema: &ConceptSchema,
    resolution: usize,
    max_samples: usize,
    eval_fraction: f64,
    split_seed: u64,
) -> Result<Prepared> {
    let indices = stride_indices(schema.total(), max_samples);
    let ds = generate_indices(schema, resolution, &indices)?;
    let positions: Vec<usize> = (0..ds.len()).collect();
    let (train, eval) = stratified_split(&ds, &positions, eval_fraction, split_seed);
    if train.is_empty() || eval.is_empty() {
        return Err(Error::InvalidInput(format!("split of {} samples leaves an empty side", ds.len())));
    }
    let index_of = |rows: &[usize]| rows.iter().map(|&r| ds.samples()[r].index).collect::<Vec<_>>();
    let varying = schema.cardinalities().iter().enumerate().filter(|(_, &c)| c > 1).map(|(k, _)| k).collect();
    Ok(Prepared {
        schema: schema.clone(),
        resolution,
        input: Shape3::new(schema.channels(), resolution, resolution),
        train_x: ds.input_matrix(&train),
        train_c: ds.concepts(&train),
        train_index: index_of(&train),
        eval_x: ds.input_matrix(&eval),
        eval_c: ds.concepts(&eval),
        eval_index: index_of(&eval),
        varying,
    })
}

impl Prepared {
    pub fn concept_names(&self) -> Vec<String> {
        self.varying.iter().map(|&k| self.schema.concepts()[k].name.clone()).collect()
    }

    /// Per-concept accuracies restricted to the scored concepts.
    pub fn scored(&self, per_concept: &[f64]) -> Vec<f64> {
        self.varying.iter().map(|&k| per_concept[k]).collect()
    }

    /// Seeded permutation of training rows; its prefixes are nested labelled subsets.
    pub fn permutation(&self, seed: u64) -> Vec<usize> {
        let mut p: Vec<usize> = (0..self.train_c.len()).collect();
        p.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x1ABE_11ED));
        p
    }
}

/// A fixed set of pairs: every first element is a training row and gets one
/// partner `k` concepts away, drawn on first use and never from the
/// held-out set.
pub struct RenderedPairs<'a> {
    schema: &'a ConceptSchema,
    resolution: usize,
    k: usize,
    firsts: Matrix<f32>,
    first_c: Vec<ConceptVector>,
    excluded: HashSet<usize>,
    partners: Vec<Option<usize>>,
    cache: HashMap<usize, Vec<f32>>,
    rng: ChaCha8Rng,
}

const MAX_REDRAWS: usize = 64;

impl<'a> RenderedPairs<'a> {
    pub fn new(data: &'a Prepared, rows: &[usize], k: usize, seed: u64) -> Self {
        let mut cache = HashMap::new();
        for (i, &idx) in data.train_index.iter().enumerate() {
            cache.insert(idx, data.train_x.row(i).to_vec());
        }
        Self {
            schema: &data.schema,
            resolution: data.resolution,
            k,
            firsts: data.train_x.gather_rows(rows),
            first_c: rows.iter().map(|&r| data.train_c[r].clone()).collect(),
            excluded: data.eval_index.iter().copied().collect(),
            partners: vec![None; rows.len()],
            cache,
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x9A12_5EED),
        }
    }

    fn partner(&mut self, row: usize) -> Result<&[f32]> {
        if let Some(index) = self.partners[row] {
            return Ok(&self.cache[&index]);
        }
        let first = &self.first_c[row];
        let mut tries = 0;
        let (index, c) = loop {
            let c = perturb_concepts(self.schema, first, self.k, &mut self.rng)?;
            let index = self.schema.concepts_to_index(&c)?;
            if !self.excluded.contains(&index) {
                break (index, c);
            }
            tries += 1;
            if tries == MAX_REDRAWS {
                return Err(Error::InvalidPair("every drawn partner lies in the held-out split".into()));
            }
        };
        if !self.cache.contains_key(&index) {
            let img = render(self.schema, &c, self.resolution)?;
            let mut v = vec![0f32; img.len()];
            img.write_chw(&mut v);
            self.cache.insert(index, v);
        }
        self.partners[row] = Some(index);
        Ok(&self.cache[&index])
    }
}

impl PairStream<f32> for RenderedPairs<'_> {
    fn len(&self) -> usize {
        self.first_c.len()
    }

    fn batch(&mut self, rows: &[usize]) -> Result<(Matrix<f32>, Matrix<f32>)> {
        let x1 = self.firsts.gather_rows(rows);
        let mut x2 = Vec::with_capacity(x1.data().len());
        for &r in rows {
            x2.extend_from_slice(self.partner(r)?);
        }
        let x2 = Matrix::from_vec(rows.len(), x1.cols(), x2)?;
        Ok((x1, x2))
    }
}
