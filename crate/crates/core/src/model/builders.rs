use serde::{Deserialize, Serialize};

use super::{Head, LayerSpec, Model, ModelMeta, TaskKind};
use crate::error::{Error, Result};
use crate::layers::{ActivationKind, Aggregator, CoarsenMode, CoarsenSpec};

/// Multi-scale classifier: each block is recenter, conv, activation and
/// coarsening, followed by a global-pool tap; the taps feed a real head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub widths: Vec<usize>,
    pub kernel_size: usize,
    pub coarsen_factor: usize,
    pub coarsen_mode: CoarsenMode,
    pub aggregator: Aggregator,
    pub activation: ActivationKind,
    pub hidden: Option<usize>,
    /// Auxiliary invariant features appended before the head (e.g. a radial histogram).
    pub aux_features: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            widths: vec![16, 32, 64],
            kernel_size: 5,
            coarsen_factor: 2,
            coarsen_mode: CoarsenMode::Strided,
            aggregator: Aggregator::Mean,
            activation: ActivationKind::ModRelu,
            hidden: None,
            aux_features: 0,
        }
    }
}

impl ClassifierConfig {
    /// Default configuration with `blocks` blocks of doubling width.
    pub fn with_blocks(blocks: usize) -> Self {
        ClassifierConfig {
            widths: (0..blocks).map(|i| 16 << i).collect(),
            ..Default::default()
        }
    }
}

pub fn build_classifier(n: usize, k: usize, classes: usize, cfg: &ClassifierConfig) -> Result<Model> {
    if cfg.widths.is_empty() {
        return Err(Error::invalid("classifier needs at least one block"));
    }
    if classes < 2 {
        return Err(Error::invalid("classifier needs at least two classes"));
    }
    let coarsen = CoarsenSpec::new(cfg.coarsen_factor, cfg.coarsen_mode, cfg.aggregator)?;
    let mut layers = Vec::new();
    let mut channels = k;
    for &w in &cfg.widths {
        layers.extend([
            LayerSpec::Recenter,
            LayerSpec::Conv {
                in_channels: channels,
                out_channels: w,
                kernel_size: cfg.kernel_size,
            },
            LayerSpec::Activation {
                kind: cfg.activation,
                channels: w,
            },
            LayerSpec::Coarsen { spec: coarsen },
            LayerSpec::Tap { recenter: true },
        ]);
        channels = w;
    }
    Model::new(
        k,
        n,
        cfg.aux_features,
        layers,
        Head::Affine {
            hidden: cfg.hidden,
            outputs: classes,
        },
        ModelMeta::for_task(TaskKind::Classify),
    )
}

/// Node-level regressor: length-preserving conv/activation stack, then a
/// single-channel conv whose per-node modulus is the prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorConfig {
    pub widths: Vec<usize>,
    pub kernel_size: usize,
    pub activation: ActivationKind,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        RegressorConfig {
            widths: vec![16, 16, 16],
            kernel_size: 5,
            activation: ActivationKind::Siglog,
        }
    }
}

pub fn build_regressor(n: usize, k: usize, cfg: &RegressorConfig) -> Result<Model> {
    if cfg.widths.is_empty() {
        return Err(Error::invalid("regressor needs at least one block"));
    }
    let mut layers = Vec::new();
    let mut channels = k;
    for &w in &cfg.widths {
        layers.extend([
            LayerSpec::Recenter,
            LayerSpec::Conv {
                in_channels: channels,
                out_channels: w,
                kernel_size: cfg.kernel_size,
            },
            LayerSpec::Activation {
                kind: cfg.activation,
                channels: w,
            },
        ]);
        channels = w;
    }
    layers.extend([
        LayerSpec::Recenter,
        LayerSpec::Conv {
            in_channels: channels,
            out_channels: 1,
            kernel_size: cfg.kernel_size,
        },
    ]);
    Model::new(
        k,
        n,
        0,
        layers,
        Head::NodeMagnitude,
        ModelMeta::for_task(TaskKind::Regress),
    )
}

/// Equivariant autoencoder. The encoder ends in a coarse latent contour
/// (`n / latent_factor` samples); the decoder upsamples and convolves back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub widths: Vec<usize>,
    pub latent_channels: usize,
    pub kernel_size: usize,
    pub coarsen_mode: CoarsenMode,
    pub aggregator: Aggregator,
    pub activation: ActivationKind,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            widths: vec![8, 8],
            latent_channels: 4,
            kernel_size: 5,
            coarsen_mode: CoarsenMode::Strided,
            aggregator: Aggregator::Mean,
            activation: ActivationKind::ModRelu,
        }
    }
}

pub fn build_autoencoder(
    n: usize,
    k: usize,
    latent_factor: usize,
    cfg: &AutoencoderConfig,
) -> Result<Model> {
    if cfg.widths.is_empty() || cfg.latent_channels == 0 {
        return Err(Error::invalid("autoencoder needs hidden and latent channels"));
    }
    if latent_factor == 0 || !n.is_multiple_of(latent_factor) {
        return Err(Error::NotDivisible {
            n,
            factor: latent_factor,
        });
    }
    let conv = |i, o| LayerSpec::Conv {
        in_channels: i,
        out_channels: o,
        kernel_size: cfg.kernel_size,
    };
    let act = |c| LayerSpec::Activation {
        kind: cfg.activation,
        channels: c,
    };
    let mut layers = Vec::new();
    let mut channels = k;
    for &w in &cfg.widths {
        layers.extend([LayerSpec::Recenter, conv(channels, w), act(w)]);
        channels = w;
    }
    if latent_factor > 1 {
        layers.push(LayerSpec::Coarsen {
            spec: CoarsenSpec::new(latent_factor, cfg.coarsen_mode, cfg.aggregator)?,
        });
    }
    layers.push(conv(channels, cfg.latent_channels));
    channels = cfg.latent_channels;
    if latent_factor > 1 {
        layers.push(LayerSpec::Upsample {
            factor: latent_factor,
        });
    }
    for &w in cfg.widths.iter().rev() {
        layers.extend([conv(channels, w), act(w)]);
        channels = w;
    }
    layers.push(conv(channels, k));
    Model::new(
        k,
        n,
        0,
        layers,
        Head::Reconstruction,
        ModelMeta::for_task(TaskKind::Autoencode),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_classifier_size() {
        let m = build_classifier(64, 1, 10, &ClassifierConfig::default()).unwrap();
        // complex taps: 5 * (16 + 16*32 + 32*64) = 12880 -> 25760 reals
        let taps = 2 * 5 * (16 + 16 * 32 + 32 * 64);
        let biases = 16 + 32 + 64;
        let alphas = 3;
        let head = 10 * 112 + 10;
        assert_eq!(m.num_params(), taps + biases + alphas + head);
        assert_eq!(m.tap_features(), 112);
    }

    #[test]
    fn classifier_checks_divisibility() {
        assert!(matches!(
            build_classifier(36, 1, 4, &ClassifierConfig::default()),
            Err(Error::NotDivisible { .. })
        ));
        assert!(build_classifier(36, 1, 4, &ClassifierConfig::with_blocks(2)).is_ok());
        assert!(build_classifier(36, 1, 4, &ClassifierConfig::with_blocks(0)).is_err());
    }

    #[test]
    fn regressor_preserves_length() {
        let m = build_regressor(100, 1, &RegressorConfig::default()).unwrap();
        assert_eq!(m.output_shape(), (1, 100));
    }

    #[test]
    fn autoencoder_round_trips_shape() {
        let m = build_autoencoder(64, 2, 4, &AutoencoderConfig::default()).unwrap();
        assert_eq!(m.output_shape(), (2, 64));
        assert!(build_autoencoder(64, 1, 3, &AutoencoderConfig::default()).is_err());
    }
}
