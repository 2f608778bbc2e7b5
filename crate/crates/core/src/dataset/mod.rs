//! Procedural concept-annotated image datasets.

mod export;
mod generate;
mod pairs;
mod render;
mod schema;

pub use export::{export_dataset, import_dataset};
pub use generate::{
    generate_dataset, generate_indices, stratified_split, stream_dataset, stride_indices, Dataset,
    GenerateOptions, Sample,
};
pub use pairs::{perturb_concepts, sample_pair, sample_pair_concepts, PairSample};
pub use render::{check_resolution, hue_to_rgb, render, Image, HORIZON, SUPERSAMPLE};
pub use schema::{
    build_schema, reduced_dsprites_subset, reduced_shapes3d_subset, Concept, ConceptSchema,
    ConceptValue, ConceptVector, DatasetId, SubsetSpec, BLUE, GREEN, PURPLE, TURQUOISE,
};
