//! Task labels over concept vectors and the loudness dataset setups.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    build_schema, reduced_dsprites_subset, reduced_shapes3d_subset, ConceptSchema, ConceptValue, ConceptVector,
    DatasetId, SubsetSpec, BLUE, GREEN, PURPLE, TURQUOISE,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    Shape,
    BinShape,
    BinScaleXorBinShape,
}

impl TaskName {
    pub const ALL: [TaskName; 3] = [TaskName::Shape, TaskName::BinShape, TaskName::BinScaleXorBinShape];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskName::Shape => "shape",
            TaskName::BinShape => "bin_shape",
            TaskName::BinScaleXorBinShape => "bin_scale_xor_bin_shape",
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownTask(s.to_string()))
    }
}

/// A deterministic concept-to-label map bound to one schema.
///
/// Shape and scale conditions are resolved against the full value grid of
/// the dataset, so a task defined as `c_scale > 2` refers to the third
/// scale value of the original dataset even on a subset schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: TaskName,
    pub dataset_id: DatasetId,
    pub num_classes: usize,
    shape_concept: usize,
    scale_concept: usize,
    /// Label of each shape value under the shape task.
    shape_class: Vec<usize>,
    /// Binarized shape per shape value.
    shape_bit: Vec<bool>,
    /// `c_scale > 2` per scale value.
    scale_bit: Vec<bool>,
}

/// Position of `value` in the full dataset grid of `concept`.
fn parent_index(full: &ConceptSchema, concept: &str, value: &ConceptValue) -> Result<usize> {
    let ci = full
        .concept_index(concept)
        .ok_or_else(|| Error::InvalidSchema(format!("dataset has no `{concept}` concept")))?;
    full.concepts()[ci]
        .values
        .iter()
        .position(|v| match (v, value) {
            (ConceptValue::Scalar(a), ConceptValue::Scalar(b)) => (a - b).abs() < 1e-12,
            _ => v == value,
        })
        .ok_or_else(|| Error::InvalidSchema(format!("value {value:?} is not on the `{concept}` grid")))
}

pub fn make_task(schema: &ConceptSchema, name: TaskName) -> Result<TaskSpec> {
    let id = schema.dataset_id();
    let full = match id {
        DatasetId::DspritesColour => build_schema(id, Some((GREEN, PURPLE)))?,
        _ => build_schema(id, None)?,
    };
    let lookup = |concept: &str| -> Result<(usize, Vec<usize>)> {
        let ci = schema
            .concept_index(concept)
            .ok_or_else(|| Error::InvalidSchema(format!("schema has no `{concept}` concept")))?;
        let parents = schema.concepts()[ci]
            .values
            .iter()
            .map(|v| parent_index(&full, concept, v))
            .collect::<Result<Vec<_>>>()?;
        Ok((ci, parents))
    };
    let (shape_concept, shapes) = lookup("shape")?;
    let (scale_concept, scales) = lookup("scale")?;
    let shape_bit: Vec<bool> = match id {
        DatasetId::Dsprites | DatasetId::DspritesColour => shapes.iter().map(|&s| s == 0 || s == 1).collect(),
        DatasetId::Shapes3dProxy => shapes.iter().map(|&s| s >= 2).collect(),
    };
    let num_classes = match name {
        TaskName::Shape => full.concepts()[full.concept_index("shape").expect("shape")].cardinality(),
        _ => 2,
    };
    Ok(TaskSpec {
        name,
        dataset_id: id,
        num_classes,
        shape_concept,
        scale_concept,
        shape_class: shapes,
        shape_bit,
        scale_bit: scales.iter().map(|&s| s > 2).collect(),
    })
}

impl TaskSpec {
    pub fn label(&self, c: &ConceptVector) -> usize {
        let shape = c.get(self.shape_concept);
        match self.name {
            TaskName::Shape => self.shape_class[shape],
            TaskName::BinShape => self.shape_bit[shape] as usize,
            TaskName::BinScaleXorBinShape => {
                // The xor task uses `c_shape == 2` (heart) on dSprites and
                // `c_shape >= 2` on shapes3d, both of which are !bin_shape
                // on dSprites and bin_shape on shapes3d.
                let shape_cond = match self.dataset_id {
                    DatasetId::Shapes3dProxy => self.shape_bit[shape],
                    _ => self.shape_class[shape] == 2,
                };
                (shape_cond ^ self.scale_bit[c.get(self.scale_concept)]) as usize
            }
        }
    }

    pub fn labels<'a>(&self, cs: impl IntoIterator<Item = &'a ConceptVector>) -> Vec<usize> {
        cs.into_iter().map(|c| self.label(c)).collect()
    }
}

/// The reduced grids used by the data-efficiency and task-dependence
/// experiments.
pub fn reduced_schema(id: DatasetId) -> Result<ConceptSchema> {
    match id {
        DatasetId::Dsprites => build_schema(id, None)?.apply_subset(&reduced_dsprites_subset()),
        DatasetId::Shapes3dProxy => build_schema(id, None)?.apply_subset(&reduced_shapes3d_subset()),
        DatasetId::DspritesColour => Err(Error::InvalidInput("no reduced grid for dsprites_colour".into())),
    }
}

/// A subset schema whose concepts differ in input-space loudness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoudnessSetup {
    pub name: String,
    pub schema: ConceptSchema,
    pub loud: Vec<String>,
    pub quiet: Vec<String>,
}

impl LoudnessSetup {
    fn new(name: &str, schema: ConceptSchema, loud: &[&str], quiet: &[&str]) -> Result<Self> {
        for c in loud.iter().chain(quiet) {
            if schema.concept_index(c).is_none() {
                return Err(Error::InvalidSchema(format!("setup `{name}` lists unknown concept `{c}`")));
            }
        }
        Ok(Self {
            name: name.to_string(),
            schema,
            loud: loud.iter().map(|s| s.to_string()).collect(),
            quiet: quiet.iter().map(|s| s.to_string()).collect(),
        })
    }

    pub fn quiet_indices(&self) -> Vec<usize> {
        self.quiet.iter().filter_map(|c| self.schema.concept_index(c)).collect()
    }

    pub fn loud_indices(&self) -> Vec<usize> {
        self.loud.iter().filter_map(|c| self.schema.concept_index(c)).collect()
    }
}

const SPATIAL_QUIET: [&str; 3] = ["shape", "scale", "rotation"];
const SPATIAL_LOUD: [&str; 2] = ["pos_x", "pos_y"];

/// High and low spatial variance dSprites subsets. Shape is limited to the
/// three available shapes.
pub fn make_spatial_variance_setups() -> Result<(LoudnessSetup, LoudnessSetup)> {
    let base = build_schema(DatasetId::Dsprites, None)?;
    let subset = |pos: Vec<usize>| {
        SubsetSpec::new(vec![vec![0], (0..3).collect(), (0..6).collect(), (0..20).collect(), pos.clone(), pos])
    };
    let high = base.apply_subset(&subset(vec![0, 10, 20, 30]))?;
    let low = base.apply_subset(&subset(vec![0, 1, 2, 3]))?;
    Ok((
        LoudnessSetup::new("high_spatial_variance", high, &SPATIAL_LOUD, &SPATIAL_QUIET)?,
        LoudnessSetup::new("low_spatial_variance", low, &SPATIAL_LOUD, &SPATIAL_QUIET)?,
    ))
}

/// Green paired with purple, blue and turquoise, in decreasing RGB distance.
pub fn make_colour_variance_setups() -> Result<Vec<LoudnessSetup>> {
    let subset = SubsetSpec::new(vec![
        vec![0],
        (0..3).collect(),
        (0..3).collect(),
        vec![0, 2, 4, 6],
        SubsetSpec::stride(0, 17, 2),
        SubsetSpec::stride(0, 17, 2),
        vec![0, 1],
    ]);
    [("green_purple", PURPLE), ("green_blue", BLUE), ("green_turquoise", TURQUOISE)]
        .into_iter()
        .map(|(name, second)| {
            let schema = build_schema(DatasetId::DspritesColour, Some((GREEN, second)))?.apply_subset(&subset)?;
            LoudnessSetup::new(name, schema, &["colour"], &["shape", "scale", "rotation", "pos_x", "pos_y"])
        })
        .collect()
}

/// shapes3d loudness tasks. Task 1 keeps every other hue and scale value
/// and eight orientations ({0, 2, ..., 14}) so that all three tasks hold
/// 16000 samples; tasks 2 and 3 fix the orientation and split the scale
/// grid into its lower and upper halves.
pub fn make_shapes3d_loudness_setups() -> Result<Vec<LoudnessSetup>> {
    let base = build_schema(DatasetId::Shapes3dProxy, None)?;
    let all = |n: usize| (0..n).collect::<Vec<_>>();
    let task1 = SubsetSpec::new(vec![
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 10, 2),
        SubsetSpec::stride(0, 8, 2),
        all(4),
        SubsetSpec::stride(0, 15, 2),
    ]);
    let fixed = |scale: Vec<usize>| SubsetSpec::new(vec![all(10), all(10), all(10), scale, all(4), vec![0]]);
    let hues = ["floor_hue", "wall_hue", "object_hue"];
    Ok(vec![
        LoudnessSetup::new("task1", base.apply_subset(&task1)?, &["orientation"], &["scale", "shape"])?,
        LoudnessSetup::new("task2", base.apply_subset(&fixed(vec![0, 1, 2, 3]))?, &hues, &["scale", "shape"])?,
        LoudnessSetup::new("task3", base.apply_subset(&fixed(vec![4, 5, 6, 7]))?, &hues, &["scale", "shape"])?,
    ])
}

/// Every named setup addressable from configuration.
pub fn loudness_setup(name: &str) -> Result<LoudnessSetup> {
    let (high, low) = make_spatial_variance_setups()?;
    std::iter::once(high)
        .chain(std::iter::once(low))
        .chain(make_colour_variance_setups()?)
        .chain(make_shapes3d_loudness_setups()?.into_iter().map(|mut s| {
            s.name = format!("shapes3d_{}", s.name);
            s
        }))
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownSetup(name.to_string()))
}

pub const SETUP_NAMES: [&str; 8] = [
    "high_spatial_variance",
    "low_spatial_variance",
    "green_purple",
    "green_blue",
    "green_turquoise",
    "shapes3d_task1",
    "shapes3d_task2",
    "shapes3d_task3",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::render;

    fn dsprites_c(shape: usize, scale: usize) -> ConceptVector {
        ConceptVector::new(vec![0, shape, scale, 0, 0, 0])
    }

    #[test]
    fn dsprites_task_labels() {
        let s = reduced_schema(DatasetId::Dsprites).unwrap();
        let shape = make_task(&s, TaskName::Shape).unwrap();
        let bin = make_task(&s, TaskName::BinShape).unwrap();
        let xor = make_task(&s, TaskName::BinScaleXorBinShape).unwrap();
        assert_eq!(shape.num_classes, 3);
        assert_eq!(shape.label(&dsprites_c(2, 0)), 2);
        assert_eq!(bin.label(&dsprites_c(2, 0)), 0);
        assert_eq!(bin.label(&dsprites_c(1, 0)), 1);
        assert_eq!(xor.label(&dsprites_c(2, 3)), 0);
        assert_eq!(xor.label(&dsprites_c(2, 2)), 1);
        assert_eq!(xor.label(&dsprites_c(0, 3)), 1);
    }

    #[test]
    fn labels_match_formulas_on_every_reduced_sample() {
        for id in [DatasetId::Dsprites, DatasetId::Shapes3dProxy] {
            let s = reduced_schema(id).unwrap();
            let full = build_schema(id, None).unwrap();
            let si = s.concept_index("shape").unwrap();
            let ki = s.concept_index("scale").unwrap();
            let tasks: Vec<_> = TaskName::ALL.iter().map(|&t| make_task(&s, t).unwrap()).collect();
            for i in (0..s.total()).step_by(7) {
                let c = s.index_to_concepts(i).unwrap();
                let shape = parent_index(&full, "shape", s.value(si, &c)).unwrap();
                let scale = parent_index(&full, "scale", s.value(ki, &c)).unwrap();
                let (bin, xor) = match id {
                    DatasetId::Dsprites => (shape == 0 || shape == 1, (shape == 2) ^ (scale > 2)),
                    _ => (shape >= 2, (shape >= 2) ^ (scale > 2)),
                };
                let want = [shape, bin as usize, xor as usize];
                for (t, w) in tasks.iter().zip(want) {
                    let y = t.label(&c);
                    assert_eq!(y, w);
                    assert!(y < t.num_classes);
                    assert_eq!(y, t.label(&c));
                }
            }
        }
    }

    #[test]
    fn shape_task_is_balanced() {
        let s = reduced_schema(DatasetId::Dsprites).unwrap();
        let t = make_task(&s, TaskName::Shape).unwrap();
        let mut counts = [0usize; 3];
        for i in 0..s.total() {
            counts[t.label(&s.index_to_concepts(i).unwrap())] += 1;
        }
        assert_eq!(counts, [s.total() / 3; 3]);
    }

    #[test]
    fn subset_scale_resolves_to_parent_values() {
        // Reduced shapes3d keeps scale {0, 2, 4, 6}; only 4 and 6 exceed 2.
        let s = reduced_schema(DatasetId::Shapes3dProxy).unwrap();
        let t = make_task(&s, TaskName::BinScaleXorBinShape).unwrap();
        assert_eq!(t.scale_bit, vec![false, false, true, true]);
        assert_eq!(t.num_classes, 2);
        assert_eq!(make_task(&s, TaskName::Shape).unwrap().num_classes, 4);
    }

    #[test]
    fn task_names_parse() {
        for t in TaskName::ALL {
            assert_eq!(t.as_str().parse::<TaskName>().unwrap(), t);
        }
        assert!(matches!("colour".parse::<TaskName>(), Err(Error::UnknownTask(_))));
    }

    #[test]
    fn spatial_setups() {
        let (high, low) = make_spatial_variance_setups().unwrap();
        assert_eq!(high.schema.total(), 5760);
        assert_eq!(low.schema.total(), 5760);
        assert_eq!(high.schema.cardinalities(), low.schema.cardinalities());
        assert_eq!(high.schema.cardinalities(), vec![1, 3, 6, 20, 4, 4]);
        // Adjacent pos_x steps move the sprite further in the high setup.
        let step_diff = |s: &ConceptSchema| {
            let a = ConceptVector::new(vec![0, 0, 3, 0, 1, 1]);
            let b = ConceptVector::new(vec![0, 0, 3, 0, 2, 1]);
            render(s, &a, 64).unwrap().mean_sq_diff(&render(s, &b, 64).unwrap())
        };
        assert!(step_diff(&high.schema) > step_diff(&low.schema));
        assert_eq!(high.quiet_indices(), vec![1, 2, 3]);
        assert_eq!(high.loud_indices(), vec![4, 5]);
    }

    #[test]
    fn colour_setups() {
        let setups = make_colour_variance_setups().unwrap();
        assert_eq!(setups.len(), 3);
        let dist = |s: &LoudnessSetup| {
            let c = &s.schema.concepts()[s.schema.concept_index("colour").unwrap()];
            let (a, b) = (c.values[0].rgb().unwrap(), c.values[1].rgb().unwrap());
            a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
        };
        let d: Vec<f64> = setups.iter().map(dist).collect();
        assert!((d[0] - 3f64.sqrt()).abs() < 1e-12);
        assert!((d[1] - 2f64.sqrt()).abs() < 1e-12);
        assert!((d[2] - 0.85).abs() < 1e-12);
        for s in &setups {
            assert_eq!(s.schema.total(), 5832);
            assert_eq!(s.schema.concepts()[..6], setups[0].schema.concepts()[..6]);
        }
    }

    #[test]
    fn shapes3d_setups_hold_16000() {
        let setups = make_shapes3d_loudness_setups().unwrap();
        for s in &setups {
            assert_eq!(s.schema.total(), 16000, "{}", s.name);
        }
        let o = |s: &LoudnessSetup| s.schema.cardinalities()[5];
        assert!(o(&setups[0]) > o(&setups[1]));
        let (t2, t3) = (&setups[1].schema, &setups[2].schema);
        for (i, (a, b)) in t2.concepts().iter().zip(t3.concepts()).enumerate() {
            assert_eq!(a == b, i != 3, "concept {}", a.name);
        }
    }

    #[test]
    fn setup_lookup() {
        for name in SETUP_NAMES {
            assert_eq!(loudness_setup(name).unwrap().name, name);
        }
        assert!(matches!(loudness_setup("loud"), Err(Error::UnknownSetup(_))));
    }
}
