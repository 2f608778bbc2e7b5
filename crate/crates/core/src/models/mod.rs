//! Concept bottleneck models, post-hoc concept extraction, VAEs and
//! latent probes.

pub mod cbm;
pub mod cme;
pub mod gaussian;
pub mod probe;
pub mod vae;

use serde::{Deserialize, Serialize};

use crate::nn::{Activation, NetworkSpec, Shape3};

pub use cbm::{head_argmax, one_hot, train_cbm, CbModel, CbmConfig, Regime};
pub use cme::{extract_features, train_cme, CmeModel};
pub use gaussian::{
    adaptive_average, kl_gaussian, select_shared_set, Averaging, GaussianPosterior, KlTerms, SharedSet,
};
pub use probe::{fit_latent_probe, probe_predict, ConceptProbe};
pub use vae::{train_vae, train_wvae, ElboTerms, Likelihood, PairStream, VaeConfig, VaeGrads, VaeMode, VaeModel};

/// Image-to-vector network: stride-2 convolutions (none gives an MLP)
/// followed by dense hidden layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Backbone {
    pub conv_channels: Vec<usize>,
    pub hidden: Vec<usize>,
}

impl Default for Backbone {
    fn default() -> Self {
        Self { conv_channels: vec![32, 32, 64, 64], hidden: vec![256] }
    }
}

impl Backbone {
    pub fn spec(&self, input: Shape3, outputs: usize) -> NetworkSpec {
        if self.conv_channels.is_empty() {
            NetworkSpec::mlp(input.numel(), &self.hidden, outputs, Activation::Relu)
        } else {
            NetworkSpec::conv_encoder(input, &self.conv_channels, &self.hidden, outputs)
        }
    }
}
