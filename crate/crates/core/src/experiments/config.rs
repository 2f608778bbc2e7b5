use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_resolution, DatasetId};
use crate::error::{Error, Result};
use crate::gbt::GbtConfig;
use crate::models::{Backbone, CbmConfig, VaeConfig};
use crate::nn::TrainConfig;
use crate::tasks::{TaskName, SETUP_NAMES};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    DataEfficiency,
    ConceptTaskDependence,
    VarianceFragility,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::DataEfficiency => "data_efficiency",
            ExperimentKind::ConceptTaskDependence => "concept_task_dependence",
            ExperimentKind::VarianceFragility => "variance_fragility",
        }
    }

    fn allowed(self) -> &'static [Method] {
        match self {
            ExperimentKind::DataEfficiency | ExperimentKind::VarianceFragility => &[Method::Cbm, Method::Wvae],
            ExperimentKind::ConceptTaskDependence => &[Method::Cme, Method::Cbm],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cbm,
    Cme,
    Vae,
    Wvae,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cbm => "cbm",
            Method::Cme => "cme",
            Method::Vae => "vae",
            Method::Wvae => "wvae",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::Cbm, Method::Cme, Method::Vae, Method::Wvae]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.01, 0.05, 0.1, 0.2, 0.4, 1.0];

/// Everything needed to re-run one protocol. Empty `tasks`, `setups` and
/// `methods` are filled with per-experiment defaults by [`ExperimentConfig::with_defaults`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetId,
    #[serde(default)]
    pub tasks: Vec<TaskName>,
    #[serde(default)]
    pub setups: Vec<String>,
    #[serde(default)]
    pub methods: Vec<Method>,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_labelled_count")]
    pub labelled_count: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seeds the held-out split independently of the training seeds.
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    #[serde(default = "default_eval_fraction")]
    pub eval_fraction: f64,
    /// Stride-subsample cap on the materialized grid.
    #[serde(default = "default_max_samples")]
    pub max_samples: usize,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Concepts changed between the two images of a weak-supervision pair.
    #[serde(default = "default_pair_k")]
    pub pair_k: usize,
    /// Labelled training points the fragility probes are refit on.
    #[serde(default = "default_probe_labelled")]
    pub probe_labelled: usize,
    /// Checkpoint interval in steps; one epoch when absent.
    #[serde(default)]
    pub eval_every: Option<usize>,
    /// Hidden layer tapped by CME; the penultimate layer when absent.
    #[serde(default)]
    pub layer_id: Option<usize>,
    #[serde(default = "default_train")]
    pub train: TrainConfig,
    /// Per-method overrides of `train.epochs`.
    #[serde(default)]
    pub epochs: BTreeMap<Method, usize>,
    #[serde(default)]
    pub cbm: CbmConfig,
    #[serde(default)]
    pub vae: VaeConfig,
    /// Source-model architecture for CME.
    #[serde(default)]
    pub task_model: Backbone,
    #[serde(default)]
    pub gbt: GbtConfig,
}

fn default_dataset() -> DatasetId {
    DatasetId::Dsprites
}
fn default_fractions() -> Vec<f64> {
    DEFAULT_FRACTIONS.to_vec()
}
fn default_labelled_count() -> usize {
    500
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_split_seed() -> u64 {
    1_000_003
}
fn default_eval_fraction() -> f64 {
    0.1
}
fn default_max_samples() -> usize {
    10_000
}
fn default_resolution() -> usize {
    64
}
fn default_pair_k() -> usize {
    1
}
fn default_probe_labelled() -> usize {
    1000
}
fn default_train() -> TrainConfig {
    TrainConfig { epochs: 20, ..TrainConfig::default() }
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, dataset: DatasetId) -> Self {
        Self {
            experiment,
            dataset,
            tasks: Vec::new(),
            setups: Vec::new(),
            methods: Vec::new(),
            fractions: default_fractions(),
            labelled_count: default_labelled_count(),
            seeds: default_seeds(),
            split_seed: default_split_seed(),
            eval_fraction: default_eval_fraction(),
            max_samples: default_max_samples(),
            resolution: default_resolution(),
            pair_k: default_pair_k(),
            probe_labelled: default_probe_labelled(),
            eval_every: None,
            layer_id: None,
            train: default_train(),
            epochs: BTreeMap::new(),
            cbm: CbmConfig::default(),
            vae: VaeConfig::default(),
            task_model: Backbone::default(),
            gbt: GbtConfig::default(),
        }
    }

    /// Fills per-experiment defaults and validates.
    pub fn with_defaults(mut self) -> Result<Self> {
        if self.methods.is_empty() {
            self.methods = self.experiment.allowed().to_vec();
        }
        if self.tasks.is_empty() {
            self.tasks = match self.experiment {
                ExperimentKind::ConceptTaskDependence => TaskName::ALL.to_vec(),
                _ => vec![TaskName::Shape],
            };
        }
        if self.setups.is_empty() && self.experiment == ExperimentKind::VarianceFragility {
            self.setups = vec!["high_spatial_variance".into(), "low_spatial_variance".into()];
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::Config(format!("{field}: {why}")));
        for (i, &f) in self.fractions.iter().enumerate() {
            if !(f > 0.0 && f <= 1.0) {
                return bad(&format!("fractions[{i}]"), format!("{f} is outside (0, 1]"));
            }
        }
        if self.fractions.is_empty() {
            return bad("fractions", "must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required".into());
        }
        for m in &self.methods {
            if !self.experiment.allowed().contains(m) {
                return bad("methods", format!("`{m}` is not valid for {}", self.experiment));
            }
        }
        for s in &self.setups {
            if !SETUP_NAMES.contains(&s.as_str()) {
                return bad("setups", format!("unknown setup `{s}`"));
            }
        }
        if self.experiment != ExperimentKind::VarianceFragility && self.dataset == DatasetId::DspritesColour {
            return bad("dataset", "dsprites_colour is only used through variance-fragility setups".into());
        }
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return bad("eval_fraction", format!("{} is outside (0, 1)", self.eval_fraction));
        }
        if self.max_samples < 2 {
            return bad("max_samples", "must be at least 2".into());
        }
        if self.labelled_count == 0 || self.probe_labelled < 2 {
            return bad("labelled_count", "labelled_count must be >= 1 and probe_labelled >= 2".into());
        }
        if self.pair_k == 0 {
            return bad("pair_k", "must be >= 1".into());
        }
        if self.eval_every == Some(0) {
            return bad("eval_every", "must be positive".into());
        }
        check_resolution(self.resolution).or_else(|e| bad("resolution", e.to_string()))?;
        self.train.validate().or_else(|e| bad("train", e.to_string()))?;
        for (m, &e) in &self.epochs {
            if !self.methods.contains(m) {
                return bad(&format!("epochs.{m}"), format!("{m} is not run by this experiment"));
            }
            if e == 0 && self.train.min_steps == 0 {
                return bad(&format!("epochs.{m}"), "must be positive unless train.min_steps is".into());
            }
        }
        self.vae.validate().or_else(|e| bad("vae", e.to_string()))?;
        self.gbt.validate().or_else(|e| bad("gbt", e.to_string()))?;
        if self.cbm.lambda < 0.0 {
            return bad("cbm.lambda", format!("{} is negative", self.cbm.lambda));
        }
        Ok(())
    }
}
