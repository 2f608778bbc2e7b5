//! Materialized datasets: full enumeration, stride subsamples and splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::render::{check_resolution, render, Image};
use crate::dataset::schema::{ConceptSchema, ConceptVector};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Row-major index of `concepts` in the generating schema.
    pub index: usize,
    pub image: Image,
    pub concepts: ConceptVector,
    pub label: Option<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct GenerateOptions {
    /// Largest product materialized in memory.
    pub cap: usize,
    pub shuffle_seed: Option<u64>,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self { cap: 1_000_000, shuffle_seed: None }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    schema: ConceptSchema,
    resolution: usize,
    samples: Vec<Sample>,
}

impl Dataset {
    pub fn from_samples(schema: ConceptSchema, resolution: usize, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            schema.check(&s.concepts)?;
        }
        Ok(Self { schema, resolution, samples })
    }

    pub fn schema(&self) -> &ConceptSchema {
        &self.schema
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Sample] {
        &mut self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Values per image in channel-major layout.
    pub fn input_width(&self) -> usize {
        self.resolution * self.resolution * self.schema.channels()
    }

    /// Network input rows (C, H, W flattened) for the selected samples.
    pub fn input_matrix<R: Real + From<f32>>(&self, rows: &[usize]) -> Matrix<R> {
        let width = self.input_width();
        let mut m = Matrix::zeros(rows.len(), width);
        for (r, &i) in rows.iter().enumerate() {
            self.samples[i].image.write_chw(m.row_mut(r));
        }
        m
    }

    pub fn concepts(&self, rows: &[usize]) -> Vec<ConceptVector> {
        rows.iter().map(|&i| self.samples[i].concepts.clone()).collect()
    }
}

/// Renders every concept combination in index order, optionally shuffled.
pub fn generate_dataset(schema: &ConceptSchema, resolution: usize, opts: GenerateOptions) -> Result<Dataset> {
    let total = schema.total();
    if total > opts.cap {
        return Err(Error::TooLarge { requested: total, cap: opts.cap });
    }
    let indices: Vec<usize> = (0..total).collect();
    let mut ds = generate_indices(schema, resolution, &indices)?;
    if let Some(seed) = opts.shuffle_seed {
        ds.samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(ds)
}

/// Lazily renders the full product without a size cap.
pub fn stream_dataset(
    schema: &ConceptSchema,
    resolution: usize,
) -> Result<impl Iterator<Item = Result<Sample>> + '_> {
    check_resolution(resolution)?;
    Ok((0..schema.total()).map(move |index| render_index(schema, index, resolution)))
}

fn render_index(schema: &ConceptSchema, index: usize, resolution: usize) -> Result<Sample> {
    let concepts = schema.index_to_concepts(index)?;
    let image = render(schema, &concepts, resolution)?;
    Ok(Sample { index, image, concepts, label: None })
}

/// Renders the given product indices, in the given order.
pub fn generate_indices(schema: &ConceptSchema, resolution: usize, indices: &[usize]) -> Result<Dataset> {
    check_resolution(resolution)?;
    let samples = indices
        .iter()
        .map(|&i| render_index(schema, i, resolution))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { schema: schema.clone(), resolution, samples })
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Uniform stride subsample of `0..total` keeping at most `cap` indices.
///
/// The stride is the smallest value reaching the cap that is coprime with
/// `total`, so that every trailing block of concepts is still covered.
pub fn stride_indices(total: usize, cap: usize) -> Vec<usize> {
    if cap == 0 || total == 0 {
        return Vec::new();
    }
    if total <= cap {
        return (0..total).collect();
    }
    let mut stride = total.div_ceil(cap);
    while gcd(stride, total) != 1 {
        stride += 1;
    }
    (0..total).step_by(stride).collect()
}

/// Held-out split of `positions` (indices into `dataset`), stratified on
/// the first concept with more than one value. Returns (train, eval).
pub fn stratified_split(
    dataset: &Dataset,
    positions: &[usize],
    eval_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let key = dataset.schema().cardinalities().iter().position(|&c| c > 1);
    let strata = key.map_or(1, |k| dataset.schema().cardinalities()[k]);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); strata];
    for &p in positions {
        let g = key.map_or(0, |k| dataset.samples()[p].concepts.get(k));
        groups[g].push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut eval) = (Vec::new(), Vec::new());
    for mut g in groups {
        g.shuffle(&mut rng);
        let n_eval = (g.len() as f64 * eval_fraction).round() as usize;
        eval.extend_from_slice(&g[..n_eval]);
        train.extend_from_slice(&g[n_eval..]);
    }
    train.sort_unstable();
    eval.sort_unstable();
    (train, eval)
}
