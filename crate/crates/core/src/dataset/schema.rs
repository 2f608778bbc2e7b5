//! Concept schemas: named concepts with ordered value grids, and the
//! row-major enumeration of their Cartesian product.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetId {
    Dsprites,
    DspritesColour,
    Shapes3dProxy,
}

impl DatasetId {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Dsprites => "dsprites",
            DatasetId::DspritesColour => "dsprites_colour",
            DatasetId::Shapes3dProxy => "shapes3d_proxy",
        }
    }

    /// Channels of rendered images.
    pub fn channels(self) -> usize {
        match self {
            DatasetId::Dsprites => 1,
            DatasetId::DspritesColour | DatasetId::Shapes3dProxy => 3,
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dsprites" => Ok(DatasetId::Dsprites),
            "dsprites_colour" | "dsprites_color" => Ok(DatasetId::DspritesColour),
            "shapes3d_proxy" | "shapes3d" => Ok(DatasetId::Shapes3dProxy),
            other => Err(Error::UnknownDataset(other.to_string())),
        }
    }
}

/// One entry of a concept's value grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ConceptValue {
    Label(String),
    Scalar(f64),
    Rgb([f64; 3]),
}

impl ConceptValue {
    pub fn scalar(&self) -> Option<f64> {
        match self {
            ConceptValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            ConceptValue::Label(s) => Some(s),
            _ => None,
        }
    }

    pub fn rgb(&self) -> Option<[f64; 3]> {
        match self {
            ConceptValue::Rgb(c) => Some(*c),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub values: Vec<ConceptValue>,
}

impl Concept {
    pub fn new(name: impl Into<String>, values: Vec<ConceptValue>) -> Self {
        Self { name: name.into(), values }
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }
}

/// Index of every concept into its own value list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptVector(Vec<usize>);

impl ConceptVector {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, concept: usize) -> usize {
        self.0[concept]
    }

    pub fn set(&mut self, concept: usize, value: usize) {
        self.0[concept] = value;
    }

    pub fn hamming(&self, other: &ConceptVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }
}

impl From<Vec<usize>> for ConceptVector {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

/// Retained value indices for every concept of a parent schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub retained: Vec<Vec<usize>>,
}

impl SubsetSpec {
    pub fn new(retained: Vec<Vec<usize>>) -> Self {
        Self { retained }
    }

    /// Retain every value.
    pub fn identity(schema: &ConceptSchema) -> Self {
        Self {
            retained: schema.cardinalities().into_iter().map(|c| (0..c).collect()).collect(),
        }
    }

    /// `start, start + step, ...` while below `end` (exclusive).
    pub fn stride(start: usize, end: usize, step: usize) -> Vec<usize> {
        (start..end).step_by(step.max(1)).collect()
    }
}

/// Named concepts with ordered value grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptSchema {
    dataset_id: DatasetId,
    concepts: Vec<Concept>,
}

impl ConceptSchema {
    pub fn new(dataset_id: DatasetId, concepts: Vec<Concept>) -> Result<Self> {
        let schema = Self { dataset_id, concepts };
        schema.validate()?;
        Ok(schema)
    }

    /// Checks name uniqueness and non-empty value grids.
    pub fn validate(&self) -> Result<()> {
        if self.concepts.is_empty() {
            return Err(Error::InvalidSchema("schema has no concepts".into()));
        }
        for (i, c) in self.concepts.iter().enumerate() {
            if c.values.is_empty() {
                return Err(Error::InvalidSchema(format!("concept `{}` has no values", c.name)));
            }
            if self.concepts[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::InvalidSchema(format!("duplicate concept name `{}`", c.name)));
            }
        }
        Ok(())
    }

    pub fn dataset_id(&self) -> DatasetId {
        self.dataset_id
    }

    pub fn concepts(&self) -> &[Concept] {
        &self.concepts
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn names(&self) -> Vec<&str> {
        self.concepts.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.concepts.iter().map(Concept::cardinality).collect()
    }

    pub fn concept_index(&self, name: &str) -> Option<usize> {
        self.concepts.iter().position(|c| c.name == name)
    }

    pub fn channels(&self) -> usize {
        self.dataset_id.channels()
    }

    /// Size of the Cartesian product of all value grids.
    pub fn total(&self) -> usize {
        self.concepts.iter().map(Concept::cardinality).product()
    }

    pub fn value(&self, concept: usize, c: &ConceptVector) -> &ConceptValue {
        &self.concepts[concept].values[c.get(concept)]
    }

    pub fn check(&self, c: &ConceptVector) -> Result<()> {
        if c.len() != self.concepts.len() {
            return Err(Error::InvalidConcepts(format!(
                "expected {} concepts, got {}",
                self.concepts.len(),
                c.len()
            )));
        }
        for (concept, &idx) in self.concepts.iter().zip(c.as_slice()) {
            if idx >= concept.cardinality() {
                return Err(Error::InvalidConcepts(format!(
                    "index {idx} out of range for `{}` (cardinality {})",
                    concept.name,
                    concept.cardinality()
                )));
            }
        }
        Ok(())
    }

    /// Row-major decoding with the first concept varying slowest.
    pub fn index_to_concepts(&self, index: usize) -> Result<ConceptVector> {
        let total = self.total();
        if index >= total {
            return Err(Error::IndexOutOfRange { index, total });
        }
        let mut rest = index;
        let mut out = vec![0; self.concepts.len()];
        for (slot, concept) in out.iter_mut().zip(&self.concepts).rev() {
            let card = concept.cardinality();
            *slot = rest % card;
            rest /= card;
        }
        Ok(ConceptVector(out))
    }

    pub fn concepts_to_index(&self, c: &ConceptVector) -> Result<usize> {
        self.check(c)?;
        Ok(self
            .concepts
            .iter()
            .zip(c.as_slice())
            .fold(0, |acc, (concept, &idx)| acc * concept.cardinality() + idx))
    }

    /// Schema keeping only the retained values, order preserved.
    pub fn apply_subset(&self, spec: &SubsetSpec) -> Result<ConceptSchema> {
        if spec.retained.len() != self.concepts.len() {
            return Err(Error::InvalidSubset(format!(
                "subset lists {} concepts, schema has {}",
                spec.retained.len(),
                self.concepts.len()
            )));
        }
        let mut concepts = Vec::with_capacity(self.concepts.len());
        for (concept, keep) in self.concepts.iter().zip(&spec.retained) {
            if keep.is_empty() {
                return Err(Error::InvalidSubset(format!(
                    "no values retained for `{}`",
                    concept.name
                )));
            }
            let mut values = Vec::with_capacity(keep.len());
            for &i in keep {
                let v = concept.values.get(i).ok_or_else(|| {
                    Error::InvalidSubset(format!(
                        "index {i} out of range for `{}` (cardinality {})",
                        concept.name,
                        concept.cardinality()
                    ))
                })?;
                values.push(v.clone());
            }
            concepts.push(Concept::new(concept.name.clone(), values));
        }
        ConceptSchema::new(self.dataset_id, concepts)
    }

    /// Stable content hash of names, value grids and dataset id.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("schema serializes");
        hex::encode(Sha256::digest(&json))[..16].to_string()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn scalars(values: impl IntoIterator<Item = f64>) -> Vec<ConceptValue> {
    values.into_iter().map(ConceptValue::Scalar).collect()
}

fn labels(values: &[&str]) -> Vec<ConceptValue> {
    values.iter().map(|s| ConceptValue::Label((*s).to_string())).collect()
}

pub const GREEN: [f64; 3] = [0.0, 1.0, 0.0];
pub const PURPLE: [f64; 3] = [1.0, 0.0, 1.0];
pub const BLUE: [f64; 3] = [0.0, 0.0, 1.0];
pub const TURQUOISE: [f64; 3] = [0.0, 1.0, 0.85];

fn dsprites_concepts() -> Vec<Concept> {
    vec![
        Concept::new("color", labels(&["white"])),
        Concept::new("shape", labels(&["square", "ellipse", "heart"])),
        Concept::new("scale", scalars(linspace(0.5, 1.0, 6))),
        Concept::new(
            "rotation",
            scalars((0..40).map(|i| i as f64 * std::f64::consts::TAU / 40.0)),
        ),
        Concept::new("pos_x", scalars(linspace(0.0, 1.0, 32))),
        Concept::new("pos_y", scalars(linspace(0.0, 1.0, 32))),
    ]
}

fn shapes3d_concepts() -> Vec<Concept> {
    let hues = || scalars((0..10).map(|i| i as f64 / 10.0));
    vec![
        Concept::new("floor_hue", hues()),
        Concept::new("wall_hue", hues()),
        Concept::new("object_hue", hues()),
        Concept::new("scale", scalars(linspace(0.0, 1.0, 8))),
        Concept::new("shape", labels(&["cube", "cylinder", "sphere", "capsule"])),
        Concept::new("orientation", scalars(linspace(-30.0, 30.0, 15))),
    ]
}

/// Full concept schema of a dataset. `colour_pair` is required for
/// [`DatasetId::DspritesColour`] and rejected otherwise.
pub fn build_schema(dataset_id: DatasetId, colour_pair: Option<([f64; 3], [f64; 3])>) -> Result<ConceptSchema> {
    let concepts = match (dataset_id, colour_pair) {
        (DatasetId::Dsprites, None) => dsprites_concepts(),
        (DatasetId::Shapes3dProxy, None) => shapes3d_concepts(),
        (DatasetId::DspritesColour, Some((a, b))) => {
            let mut c = dsprites_concepts();
            c.push(Concept::new("colour", vec![ConceptValue::Rgb(a), ConceptValue::Rgb(b)]));
            c
        }
        (DatasetId::DspritesColour, None) => return Err(Error::ColourPair("is required for dsprites_colour")),
        (_, Some(_)) => return Err(Error::ColourPair("is only accepted for dsprites_colour")),
    };
    ConceptSchema::new(dataset_id, concepts)
}

/// Reduced dSprites: every 5th rotation, every other position.
pub fn reduced_dsprites_subset() -> SubsetSpec {
    SubsetSpec::new(vec![
        vec![0],
        (0..3).collect(),
        (0..6).collect(),
        SubsetSpec::stride(0, 40, 5),
        SubsetSpec::stride(0, 32, 2),
        SubsetSpec::stride(0, 32, 2),
    ])
}

/// Reduced shapes3d: every other value of each concept except shape,
/// orientation truncated to seven values starting at index 0.
pub fn reduced_shapes3d_subset() -> SubsetSpec {
    SubsetSpec::new(vec![
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 8, 2),
        (0..4).collect(),
        SubsetSpec::stride(0, 13, 2),
    ])
}
