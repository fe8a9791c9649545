//! Sequential equivariant models, their task builders, the classical
//! curvature baselines, metrics, training and checkpoints.

mod baselines;
mod builders;
mod checkpoint;
mod metrics;
mod train;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamKind, ParamOwner, ParamStore, Tape};
use crate::contour::{normalize, recenter, spread, Contour};
use crate::error::{Error, Result};
use crate::layers::{ActivationKind, CoarsenSpec};
use crate::optim::{LossKind, Output};

pub use baselines::{baseline_circle_fit, baseline_finite_difference, CircleFit, FiniteDifference};
pub use builders::{
    build_autoencoder, build_classifier, build_regressor, AutoencoderConfig, ClassifierConfig,
    RegressorConfig,
};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use metrics::{evaluate, iou, rasterize_polygons, IouShape, Metric, Predictor};
pub use train::{fit, EpochStats, History, TrainConfig};


/// One step of the sequential chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Channel-wise mean removal.
    Recenter,
    Conv {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
    },
    Activation {
        kind: ActivationKind,
        channels: usize,
    },
    Coarsen {
        spec: CoarsenSpec,
    },
    Upsample {
        factor: usize,
    },
    /// Pass-through that also emits the invariant global pool of the
    /// current signal (optionally recentered first) as head features.
    Tap {
        recenter: bool,
    },
}

/// How the final signal and tap features become the model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "head", rename_all = "snake_case")]
pub enum Head {
    /// Real affine map (optionally with one ReLU hidden layer) on the
    /// concatenated tap features and auxiliary features.
    Affine {
        hidden: Option<usize>,
        outputs: usize,
    },
    /// Per-node modulus of the last channel.
    NodeMagnitude,
    /// The final contour itself.
    Reconstruction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classify,
    Regress,
    Autoencode,
}

impl TaskKind {
    pub fn loss(&self) -> LossKind {
        match self {
            TaskKind::Classify => LossKind::CrossEntropy,
            TaskKind::Regress => LossKind::MaeReal,
            TaskKind::Autoencode => LossKind::MseComplex,
        }
    }

    /// Input scaling used by default. Node regression measures scale in
    /// units of the sample spacing, the natural unit for curvature.
    pub fn default_scale(&self) -> InputScale {
        match self {
            TaskKind::Regress => InputScale::Spacing,
            TaskKind::Classify | TaskKind::Autoencode => InputScale::Spread,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Classify => "classify",
            TaskKind::Regress => "regress",
            TaskKind::Autoencode => "autoencode",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classify" => Ok(TaskKind::Classify),
            "regress" => Ok(TaskKind::Regress),
            "autoencode" => Ok(TaskKind::Autoencode),
            other => Err(Error::invalid(format!("unknown task '{other}'"))),
        }
    }
}

/// How a raw contour is brought into the model's frame. Every choice first
/// recenters; the divisor is invariant under shifts and rotations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScale {
    /// Recentering only.
    None,
    /// Divide by the spread of the centered samples (see [`normalize`]).
    Spread,
    /// Divide by the mean distance between consecutive samples.
    Spacing,
}

/// Mean distance between cyclically consecutive samples, over all channels.
pub fn mean_spacing(x: &Contour) -> f64 {
    let n = x.n();
    let total: f64 = x
        .channels()
        .iter()
        .map(|c| (0..n).map(|q| (c[(q + 1) % n] - c[q]).norm()).sum::<f64>())
        .sum();
    total / (n * x.k()) as f64
}

/// Task metadata carried with a model into checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub task: TaskKind,
    pub input_scale: InputScale,
}

impl ModelMeta {
    pub fn for_task(task: TaskKind) -> Self {
        ModelMeta {
            task,
            input_scale: task.default_scale(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub(crate) struct HeadBlocks {
    pub hidden_weight: Option<usize>,
    pub hidden_bias: Option<usize>,
    pub output_weight: Option<usize>,
    pub output_bias: Option<usize>,
}

/// A chain of layers, a head and the flat parameter vector they share.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_k: usize,
    input_n: usize,
    extra_features: usize,
    layers: Vec<LayerSpec>,
    head: Head,
    meta: ModelMeta,
    params: ParamStore,
    layer_blocks: Vec<Option<usize>>,
    head_blocks: HeadBlocks,
    // input shape (k, n) of every layer, plus the final shape
    shapes: Vec<(usize, usize)>,
    tap_features: usize,
}

impl Model {
    /// Validates that the layer shapes compose and lays out zeroed parameters.
    pub fn new(
        input_k: usize,
        input_n: usize,
        extra_features: usize,
        layers: Vec<LayerSpec>,
        head: Head,
        meta: ModelMeta,
    ) -> Result<Model> {
        if input_k == 0 || input_n == 0 {
            return Err(Error::shape("model input shape must be positive"));
        }
        let mut params = ParamStore::empty();
        let mut layer_blocks = Vec::with_capacity(layers.len());
        let mut shapes = Vec::with_capacity(layers.len() + 1);
        let (mut k, mut n) = (input_k, input_n);
        let mut tap_features = 0;
        for (i, layer) in layers.iter().enumerate() {
            shapes.push((k, n));
            let owner = ParamOwner::Layer(i);
            let block = match *layer {
                LayerSpec::Recenter => None,
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel_size,
                } => {
                    if in_channels != k {
                        return Err(Error::shape(format!(
                            "layer {i}: conv expects {in_channels} channels, chain carries {k}"
                        )));
                    }
                    if out_channels == 0 || kernel_size == 0 {
                        return Err(Error::shape(format!("layer {i}: empty conv")));
                    }
                    if kernel_size > n {
                        return Err(Error::KernelTooLarge {
                            kernel: kernel_size,
                            n,
                        });
                    }
                    k = out_channels;
                    Some(params.push_block(
                        owner,
                        ParamKind::ConvTaps,
                        2 * in_channels * out_channels * kernel_size,
                    ))
                }
                LayerSpec::Activation { kind, channels } => {
                    if channels != k {
                        return Err(Error::shape(format!(
                            "layer {i}: activation declared for {channels} channels, chain carries {k}"
                        )));
                    }
                    (kind == ActivationKind::ModRelu)
                        .then(|| params.push_block(owner, ParamKind::ModReluBias, channels))
                }
                LayerSpec::Coarsen { spec } => {
                    n = spec.output_len(n)?;
                    None
                }
                LayerSpec::Upsample { factor } => {
                    if factor < 2 {
                        return Err(Error::invalid(format!(
                            "layer {i}: upsampling factor must be at least 2"
                        )));
                    }
                    n *= factor;
                    None
                }
                LayerSpec::Tap { .. } => {
                    tap_features += k;
                    Some(params.push_block(owner, ParamKind::PoolAlpha, 1))
                }
            };
            layer_blocks.push(block);
        }
        shapes.push((k, n));

        let mut head_blocks = HeadBlocks::default();
        match head {
            Head::Affine { hidden, outputs } => {
                let inputs = tap_features + extra_features;
                if inputs == 0 || outputs == 0 {
                    return Err(Error::shape(
                        "affine head needs tap or auxiliary features and at least one output",
                    ));
                }
                let last = match hidden {
                    Some(h) if h > 0 => {
                        head_blocks.hidden_weight =
                            Some(params.push_block(ParamOwner::Head, ParamKind::HiddenWeight, h * inputs));
                        head_blocks.hidden_bias =
                            Some(params.push_block(ParamOwner::Head, ParamKind::HiddenBias, h));
                        h
                    }
                    Some(_) => return Err(Error::shape("hidden layer width must be positive")),
                    None => inputs,
                };
                head_blocks.output_weight =
                    Some(params.push_block(ParamOwner::Head, ParamKind::OutputWeight, outputs * last));
                head_blocks.output_bias =
                    Some(params.push_block(ParamOwner::Head, ParamKind::OutputBias, outputs));
            }
            Head::NodeMagnitude | Head::Reconstruction => {
                if tap_features > 0 || extra_features > 0 {
                    return Err(Error::shape(
                        "tap and auxiliary features need an affine head to feed",
                    ));
                }
                if head == Head::Reconstruction && (k, n) != (input_k, input_n) {
                    return Err(Error::shape(format!(
                        "reconstruction head needs output shape {input_k}x{input_n}, chain ends at {k}x{n}"
                    )));
                }
            }
        }

        let mut model = Model {
            input_k,
            input_n,
            extra_features,
            layers,
            head,
            meta,
            params,
            layer_blocks,
            head_blocks,
            shapes,
            tap_features,
        };
        model.reset_alphas();
        Ok(model)
    }

    pub fn input_k(&self) -> usize {
        self.input_k
    }

    pub fn input_n(&self) -> usize {
        self.input_n
    }

    pub fn extra_features(&self) -> usize {
        self.extra_features
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn meta(&self) -> ModelMeta {
        self.meta
    }

    pub fn set_input_scale(&mut self, scale: InputScale) {
        self.meta.input_scale = scale;
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Number of invariant features emitted by the taps.
    pub fn tap_features(&self) -> usize {
        self.tap_features
    }

    /// `(k, n)` entering layer `i`; index `layers().len()` is the final shape.
    pub fn shape_at(&self, i: usize) -> (usize, usize) {
        self.shapes[i]
    }

    pub fn output_shape(&self) -> (usize, usize) {
        *self.shapes.last().expect("shapes always has the final entry")
    }

    pub(crate) fn layer_block(&self, i: usize) -> Option<usize> {
        self.layer_blocks[i]
    }

    pub(crate) fn head_blocks(&self) -> HeadBlocks {
        self.head_blocks
    }

    fn reset_alphas(&mut self) {
        let alpha_blocks: Vec<usize> = (0..self.params.blocks().len())
            .filter(|&b| self.params.block(b).kind == ParamKind::PoolAlpha)
            .collect();
        for b in alpha_blocks {
            self.params.slice_mut(b).fill(0.5);
        }
    }

    /// Random initialization: complex taps uniform with `E|w|^2 = 1 / fan_in`,
    /// ModReLU biases and pool weights at their neutral values, head weights
    /// uniform in `+-1/sqrt(fan_in)`.
    pub fn init_random(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..self.layers.len() {
            let Some(b) = self.layer_blocks[i] else { continue };
            match self.layers[i] {
                LayerSpec::Conv {
                    in_channels,
                    kernel_size,
                    ..
                } => {
                    let a = (1.5 / (in_channels * kernel_size) as f64).sqrt();
                    for v in self.params.slice_mut(b) {
                        *v = rng.gen_range(-a..a);
                    }
                }
                LayerSpec::Activation { .. } => self.params.slice_mut(b).fill(0.0),
                LayerSpec::Tap { .. } => self.params.slice_mut(b).fill(0.5),
                _ => {}
            }
        }
        if let Head::Affine { hidden, .. } = self.head {
            let inputs = self.tap_features + self.extra_features;
            let hb = self.head_blocks;
            let mut fill = |block: Option<usize>, fan_in: usize, params: &mut ParamStore| {
                if let Some(b) = block {
                    let a = 1.0 / (fan_in as f64).sqrt();
                    for v in params.slice_mut(b) {
                        *v = rng.gen_range(-a..a);
                    }
                }
            };
            fill(hb.hidden_weight, inputs, &mut self.params);
            fill(hb.hidden_bias, inputs, &mut self.params);
            let last = hidden.unwrap_or(inputs);
            fill(hb.output_weight, last, &mut self.params);
            fill(hb.output_bias, last, &mut self.params);
        }
    }

    /// Every conv passes channel `j mod k_in` through unchanged (a delta at
    /// lag 0), ModReLU biases are zero and the head is zero.
    pub fn init_identity(&mut self) {
        self.params.values_mut().fill(0.0);
        self.reset_alphas();
        for i in 0..self.layers.len() {
            if let (
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel_size,
                },
                Some(b),
            ) = (self.layers[i], self.layer_blocks[i])
            {
                let vals = self.params.slice_mut(b);
                for j in 0..out_channels {
                    let c = j % in_channels;
                    let idx = (j * in_channels + c) * kernel_size;
                    vals[2 * idx] = 1.0;
                }
            }
        }
    }

    /// Applies the model's input preprocessing.
    pub fn prepare_input(&self, x: &Contour) -> Result<Contour> {
        self.prepare(x).map(|(c, _)| c)
    }

    /// The prepared input and the factor it was divided by. Node regression
    /// outputs are curvatures in units of that factor: divide them by it to
    /// get curvature in the input's units.
    pub fn prepare(&self, x: &Contour) -> Result<(Contour, f64)> {
        match self.meta.input_scale {
            InputScale::None => Ok((recenter(x), 1.0)),
            InputScale::Spread => Ok((normalize(x)?, spread(x))),
            InputScale::Spacing => {
                let s = mean_spacing(x);
                if !(s >= 1e-12) {
                    return Err(Error::DegenerateContour { sigma: s });
                }
                Ok((recenter(x).scale(Complex64::new(1.0 / s, 0.0)), s))
            }
        }
    }

    pub(crate) fn check_input(&self, x: &Contour, extra: &[f64]) -> Result<()> {
        x.check_shape(self.input_k, self.input_n, "model input")?;
        if extra.len() != self.extra_features {
            return Err(Error::shape(format!(
                "model expects {} auxiliary features, got {}",
                self.extra_features,
                extra.len()
            )));
        }
        Ok(())
    }

    /// Forward pass on an already prepared input.
    pub fn forward(&self, x: &Contour, extra: &[f64]) -> Result<Output> {
        Ok(Tape::record(self, x, extra)?.into_output())
    }

    /// The concatenated tap features followed by the auxiliary features.
    pub fn features(&self, x: &Contour, extra: &[f64]) -> Result<Vec<f64>> {
        Ok(Tape::record(self, x, extra)?.features().to_vec())
    }
}
