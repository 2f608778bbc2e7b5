//! Sequential networks built from a declarative [`NetworkSpec`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::{Activation, ConvGeometry, Layer};
use crate::nn::{Matrix, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    ConvEncoder,
    DeconvDecoder,
    Mlp,
    ClassifierHead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn flat(width: usize) -> Self {
        Self { channels: width, height: 1, width: 1 }
    }

    pub fn numel(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Architecture description. Convolutions use 4×4 kernels, stride 2 and
/// padding 1, halving (or, for the decoder, doubling) the spatial size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub kind: NetworkKind,
    pub input: Shape3,
    pub output: Shape3,
    /// Channels of the convolution stack, listed input-to-bottleneck for
    /// both encoders and decoders.
    #[serde(default)]
    pub conv_channels: Vec<usize>,
    /// Dense hidden widths (after the convolutions of an encoder, before
    /// the deconvolutions of a decoder).
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub activation: Activation,
    #[serde(default)]
    pub output_activation: Activation,
}

impl NetworkSpec {
    pub fn mlp(inputs: usize, hidden: &[usize], outputs: usize, activation: Activation) -> Self {
        Self {
            kind: NetworkKind::Mlp,
            input: Shape3::flat(inputs),
            output: Shape3::flat(outputs),
            conv_channels: Vec::new(),
            hidden: hidden.to_vec(),
            activation,
            output_activation: Activation::Identity,
        }
    }

    pub fn classifier_head(inputs: usize, hidden: &[usize], classes: usize, activation: Activation) -> Self {
        Self { kind: NetworkKind::ClassifierHead, ..Self::mlp(inputs, hidden, classes, activation) }
    }

    pub fn conv_encoder(input: Shape3, channels: &[usize], hidden: &[usize], outputs: usize) -> Self {
        Self {
            kind: NetworkKind::ConvEncoder,
            input,
            output: Shape3::flat(outputs),
            conv_channels: channels.to_vec(),
            hidden: hidden.to_vec(),
            activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    pub fn deconv_decoder(latent: usize, hidden: &[usize], channels: &[usize], output: Shape3) -> Self {
        Self {
            kind: NetworkKind::DeconvDecoder,
            input: Shape3::flat(latent),
            output,
            conv_channels: channels.to_vec(),
            hidden: hidden.to_vec(),
            activation: Activation::Relu,
            output_activation: Activation::Identity,
        }
    }

    fn conv(in_channels: usize, out_channels: usize, height: usize, width: usize) -> ConvGeometry {
        ConvGeometry { in_channels, out_channels, in_height: height, in_width: width, kernel: 4, stride: 2, padding: 1 }
    }

    fn push_dense(&self, layers: &mut Vec<Layer>, inputs: usize, outputs: usize, act: Activation) {
        layers.push(Layer::Dense { inputs, outputs });
        if act != Activation::Identity {
            layers.push(Layer::Activation { activation: act, width: outputs });
        }
    }

    fn bottleneck(&self, shape: Shape3) -> Result<(usize, usize)> {
        let factor = 1usize << self.conv_channels.len();
        if shape.height % factor != 0 || shape.width % factor != 0 {
            return Err(Error::Shape(format!(
                "{}x{} is not divisible by {factor} for {} stride-2 layers",
                shape.height,
                shape.width,
                self.conv_channels.len()
            )));
        }
        Ok((shape.height / factor, shape.width / factor))
    }

    /// Expands the spec into a chain-compatible layer list.
    pub fn layers(&self) -> Result<Vec<Layer>> {
        if self.input.numel() == 0 || self.output.numel() == 0 {
            return Err(Error::Shape("network input and output must be non-empty".into()));
        }
        if self.hidden.contains(&0) || self.conv_channels.contains(&0) {
            return Err(Error::Shape("zero-width hidden layer".into()));
        }
        let mut layers = Vec::new();
        let act = self.activation;
        match self.kind {
            NetworkKind::Mlp | NetworkKind::ClassifierHead => {
                if !self.conv_channels.is_empty() {
                    return Err(Error::Shape("dense networks take no conv_channels".into()));
                }
                if self.kind == NetworkKind::ClassifierHead
                    && (self.output.height, self.output.width) != (1, 1)
                {
                    return Err(Error::Shape("classifier head output must be a flat class vector".into()));
                }
                let mut width = self.input.numel();
                for &h in &self.hidden {
                    self.push_dense(&mut layers, width, h, act);
                    width = h;
                }
                self.push_dense(&mut layers, width, self.output.numel(), self.output_activation);
            }
            NetworkKind::ConvEncoder => {
                self.bottleneck(self.input)?;
                let (mut c, mut h, mut w) = (self.input.channels, self.input.height, self.input.width);
                for &out in &self.conv_channels {
                    layers.push(Layer::Conv2d(Self::conv(c, out, h, w)));
                    (c, h, w) = (out, h / 2, w / 2);
                    layers.push(Layer::Activation { activation: act, width: c * h * w });
                }
                let mut width = c * h * w;
                for &hid in &self.hidden {
                    self.push_dense(&mut layers, width, hid, act);
                    width = hid;
                }
                self.push_dense(&mut layers, width, self.output.numel(), self.output_activation);
            }
            NetworkKind::DeconvDecoder => {
                let Some(&deepest) = self.conv_channels.last() else {
                    return Err(Error::Shape("decoder needs at least one conv layer".into()));
                };
                let (mut h, mut w) = self.bottleneck(self.output)?;
                let mut width = self.input.numel();
                for &hid in &self.hidden {
                    self.push_dense(&mut layers, width, hid, act);
                    width = hid;
                }
                self.push_dense(&mut layers, width, deepest * h * w, act);
                let n = self.conv_channels.len();
                for i in (0..n).rev() {
                    let out = if i == 0 { self.output.channels } else { self.conv_channels[i - 1] };
                    layers.push(Layer::ConvTranspose2d(Self::conv(self.conv_channels[i], out, h, w)));
                    (h, w) = (h * 2, w * 2);
                    let a = if i == 0 { self.output_activation } else { act };
                    if a != Activation::Identity {
                        layers.push(Layer::Activation { activation: a, width: out * h * w });
                    }
                }
            }
        }
        for pair in layers.windows(2) {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::Shape(format!("layer chain mismatch: {:?} -> {:?}", pair[0], pair[1])));
            }
        }
        for l in &layers {
            l.validate()?;
        }
        Ok(layers)
    }
}

/// Activations recorded by a training forward pass.
#[derive(Clone, Debug)]
pub struct Tape<R> {
    rows: usize,
    /// `activations[0]` is the input, `activations[i + 1]` the output of layer `i`.
    activations: Vec<Vec<R>>,
}

impl<R: Real> Tape<R> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn output(&self) -> &[R] {
        self.activations.last().expect("non-empty tape")
    }

    pub fn output_matrix(&self) -> Matrix<R> {
        let out = self.output().to_vec();
        let cols = out.len() / self.rows.max(1);
        Matrix::from_vec(self.rows, cols, out).expect("tape shape")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network<R> {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    params: Vec<R>,
}

impl<R: Real> Network<R> {
    /// Deterministic initialization from `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let layers = spec.layers()?;
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        offsets.push(total);
        let mut params = vec![R::zero(); total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, w) in layers.iter().zip(offsets.windows(2)) {
            l.init(&mut params[w[0]..w[1]], &mut rng);
        }
        Ok(Self { spec, layers, offsets, params })
    }

    pub fn with_params(spec: NetworkSpec, params: Vec<R>) -> Result<Self> {
        let mut net = Self::new(spec, 0)?;
        if params.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[R] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [R] {
        &mut self.params
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().expect("non-empty network").output_width()
    }

    /// Width of the activations after `layer_id`.
    pub fn layer_width(&self, layer_id: usize) -> Result<usize> {
        self.layers
            .get(layer_id)
            .map(Layer::output_width)
            .ok_or_else(|| Error::InvalidInput(format!("layer {layer_id} out of range (network has {})", self.layers.len())))
    }

    /// Last hidden activation before the output layer.
    pub fn penultimate_layer(&self) -> Option<usize> {
        let last_dense = self.layers.iter().rposition(|l| !l.is_activation())?;
        self.layers[..last_dense].iter().rposition(Layer::is_activation)
    }

    fn check_input(&self, x: &Matrix<R>) -> Result<()> {
        if x.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} does not match network input {}",
                x.cols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Matrix<R>, upto: usize) -> Vec<R> {
        let n = x.rows();
        let mut cur = x.data().to_vec();
        for (i, l) in self.layers[..=upto].iter().enumerate() {
            let mut out = vec![R::zero(); n * l.output_width()];
            l.forward(&self.params[self.offsets[i]..self.offsets[i + 1]], &cur, n, &mut out);
            cur = out;
        }
        cur
    }

    pub fn forward(&self, x: &Matrix<R>) -> Result<Matrix<R>> {
        self.forward_to(x, self.layers.len() - 1)
    }

    /// Activations after layer `layer_id`.
    pub fn forward_to(&self, x: &Matrix<R>, layer_id: usize) -> Result<Matrix<R>> {
        self.check_input(x)?;
        let width = self.layer_width(layer_id)?;
        Matrix::from_vec(x.rows(), width, self.run(x, layer_id))
    }

    pub fn forward_train(&self, x: &Matrix<R>) -> Result<Tape<R>> {
        self.check_input(x)?;
        let n = x.rows();
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.data().to_vec());
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = vec![R::zero(); n * l.output_width()];
            l.forward(&self.params[self.offsets[i]..self.offsets[i + 1]], &activations[i], n, &mut out);
            activations.push(out);
        }
        Ok(Tape { rows: n, activations })
    }

    /// Backpropagates `grad_out` (same shape as the tape output), adding
    /// parameter gradients into `grads`. Returns the input gradient when
    /// `want_input` is set.
    pub fn backward(&self, tape: &Tape<R>, grad_out: &[R], grads: &mut [R], want_input: bool) -> Option<Vec<R>> {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer size");
        assert_eq!(grad_out.len(), tape.output().len(), "output gradient size");
        let n = tape.rows;
        let mut g = grad_out.to_vec();
        for i in (0..self.layers.len()).rev() {
            let l = &self.layers[i];
            let need = want_input || i > 0;
            let mut gi = if need { vec![R::zero(); n * l.input_width()] } else { Vec::new() };
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            l.backward(
                &self.params[lo..hi],
                &tape.activations[i],
                &tape.activations[i + 1],
                &g,
                n,
                &mut grads[lo..hi],
                need.then_some(gi.as_mut_slice()),
            );
            g = gi;
        }
        want_input.then_some(g)
    }
}
