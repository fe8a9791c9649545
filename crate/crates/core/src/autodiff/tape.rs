use num_complex::Complex64;

use super::params::pack_complex;
use crate::contour::{recenter, Contour};
use crate::error::{Error, Result};
use crate::layers::{
    activation_backward, apply_kind, coarsen_apply, conv_apply, conv_backward, pool_apply,
    pool_backward, upsample_apply, ActivationKind, Aggregator, CoarsenSpec, PoolCache,
};
use crate::model::{Head, LayerSpec, Model};
use crate::optim::{loss_and_grad, LossSpec, Output, Target};

#[derive(Debug, Clone)]
enum Entry {
    Recenter,
    Conv {
        input: Contour,
        taps: Vec<Complex64>,
    },
    Activation {
        input: Contour,
        kind: ActivationKind,
        biases: Vec<f64>,
    },
    Coarsen {
        spec: CoarsenSpec,
        n_in: usize,
        picks: Vec<Vec<usize>>,
    },
    Upsample {
        factor: usize,
    },
    Tap {
        pooled: Contour,
        cache: PoolCache,
        alpha: f64,
        offset: usize,
        recenter: bool,
    },
}

#[derive(Debug, Clone)]
enum HeadCache {
    Affine {
        hidden_pre: Option<Vec<f64>>,
        hidden_act: Option<Vec<f64>>,
    },
    NodeMagnitude,
    Reconstruction,
}

/// A recorded forward pass: the input, every layer's cached intermediates
/// and the output. Owned by one forward/backward pair.
#[derive(Debug, Clone)]
pub struct Tape {
    input: Contour,
    extra: Vec<f64>,
    entries: Vec<Entry>,
    last: Contour,
    features: Vec<f64>,
    head: HeadCache,
    output: Output,
}

fn affine(weights: &[f64], bias: &[f64], input: &[f64]) -> Vec<f64> {
    let cols = input.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| {
            let row = &weights[o * cols..(o + 1) * cols];
            b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>()
        })
        .collect()
}

impl Tape {
    /// Runs `model` on `x` (already prepared) and records every intermediate.
    pub fn record(model: &Model, x: &Contour, extra: &[f64]) -> Result<Tape> {
        model.check_input(x, extra)?;
        let params = model.params();
        let mut entries = Vec::with_capacity(model.layers().len());
        let mut features = Vec::with_capacity(model.tap_features() + extra.len());
        let mut signal = x.clone();
        for (i, layer) in model.layers().iter().enumerate() {
            let block = model.layer_block(i);
            match *layer {
                LayerSpec::Recenter => {
                    signal = recenter(&signal);
                    entries.push(Entry::Recenter);
                }
                LayerSpec::Conv {
                    in_channels,
                    out_channels,
                    kernel_size,
                } => {
                    let taps = params.complex(block.expect("conv owns taps"));
                    let out = conv_apply(&taps, in_channels, out_channels, kernel_size, &signal);
                    entries.push(Entry::Conv {
                        input: std::mem::replace(&mut signal, out),
                        taps,
                    });
                }
                LayerSpec::Activation { kind, channels } => {
                    let biases = match block {
                        Some(b) => params.slice(b).to_vec(),
                        None => vec![0.0; channels],
                    };
                    let out = Contour::from_raw(
                        signal
                            .channels()
                            .iter()
                            .zip(&biases)
                            .map(|(ch, &b)| ch.iter().map(|&z| apply_kind(kind, b, z)).collect())
                            .collect(),
                    );
                    entries.push(Entry::Activation {
                        input: std::mem::replace(&mut signal, out),
                        kind,
                        biases,
                    });
                }
                LayerSpec::Coarsen { spec } => {
                    let n_in = signal.n();
                    let (out, picks) = coarsen_apply(&spec, &signal);
                    signal = out;
                    entries.push(Entry::Coarsen { spec, n_in, picks });
                }
                LayerSpec::Upsample { factor } => {
                    signal = upsample_apply(&signal, factor);
                    entries.push(Entry::Upsample { factor });
                }
                LayerSpec::Tap { recenter: rc } => {
                    let alpha = params.slice(block.expect("tap owns alpha"))[0];
                    let pooled = if rc { recenter(&signal) } else { signal.clone() };
                    let (f, cache) = pool_apply(alpha, &pooled);
                    let offset = features.len();
                    features.extend(f);
                    entries.push(Entry::Tap {
                        pooled,
                        cache,
                        alpha,
                        offset,
                        recenter: rc,
                    });
                }
            }
        }
        features.extend_from_slice(extra);

        let (head, output) = match model.head() {
            Head::Affine { hidden, .. } => {
                let hb = model.head_blocks();
                let w = params.slice(hb.output_weight.expect("affine head weights"));
                let b = params.slice(hb.output_bias.expect("affine head bias"));
                match hidden {
                    Some(_) => {
                        let w1 = params.slice(hb.hidden_weight.expect("hidden weights"));
                        let b1 = params.slice(hb.hidden_bias.expect("hidden bias"));
                        let pre = affine(w1, b1, &features);
                        let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
                        let logits = affine(w, b, &act);
                        (
                            HeadCache::Affine {
                                hidden_pre: Some(pre),
                                hidden_act: Some(act),
                            },
                            Output::Real(logits),
                        )
                    }
                    None => (
                        HeadCache::Affine {
                            hidden_pre: None,
                            hidden_act: None,
                        },
                        Output::Real(affine(w, b, &features)),
                    ),
                }
            }
            Head::NodeMagnitude => {
                let last = signal.channel(signal.k() - 1);
                (
                    HeadCache::NodeMagnitude,
                    Output::Real(last.iter().map(|z| z.norm()).collect()),
                )
            }
            Head::Reconstruction => (HeadCache::Reconstruction, Output::Contour(signal.clone())),
        };

        Ok(Tape {
            input: x.clone(),
            extra: extra.to_vec(),
            entries,
            last: signal,
            features,
            head,
            output,
        })
    }

    pub fn output(&self) -> &Output {
        &self.output
    }

    pub fn into_output(self) -> Output {
        self.output
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Re-runs the forward pass from the recorded input.
    pub fn replay(&self, model: &Model) -> Result<Output> {
        Ok(Tape::record(model, &self.input, &self.extra)?.output)
    }

    /// Reverse pass: the gradient of the loss with respect to every real
    /// parameter of `model`, given the loss gradient at the output.
    pub fn backward(&self, model: &Model, grad_output: &Output) -> Result<Vec<f64>> {
        let params = model.params();
        let mut grad = vec![0.0; params.len()];
        let (k, n) = model.output_shape();

        let mut feature_grad = Vec::new();
        let mut g = match (&self.head, model.head(), grad_output) {
            (HeadCache::Affine { hidden_pre, hidden_act }, Head::Affine { outputs, .. }, Output::Real(go)) => {
                if go.len() != outputs {
                    return Err(Error::shape(format!(
                        "head has {outputs} outputs, gradient has {}",
                        go.len()
                    )));
                }
                let hb = model.head_blocks();
                let wb = hb.output_weight.expect("affine head weights");
                let bb = hb.output_bias.expect("affine head bias");
                let w = params.slice(wb);
                let head_in = hidden_act.as_deref().unwrap_or(&self.features);
                let cols = head_in.len();
                let w_off = params.block(wb).offset;
                let b_off = params.block(bb).offset;
                let mut g_in = vec![0.0; cols];
                for (o, &gv) in go.iter().enumerate() {
                    grad[b_off + o] += gv;
                    for j in 0..cols {
                        grad[w_off + o * cols + j] += gv * head_in[j];
                        g_in[j] += w[o * cols + j] * gv;
                    }
                }
                if let Some(pre) = hidden_pre {
                    let w1b = hb.hidden_weight.expect("hidden weights");
                    let b1b = hb.hidden_bias.expect("hidden bias");
                    let w1 = params.slice(w1b);
                    let w1_off = params.block(w1b).offset;
                    let b1_off = params.block(b1b).offset;
                    let f = &self.features;
                    let mut gf = vec![0.0; f.len()];
                    for (j, &pj) in pre.iter().enumerate() {
                        // ReLU subgradient 0 at the kink
                        if pj <= 0.0 {
                            continue;
                        }
                        let gp = g_in[j];
                        grad[b1_off + j] += gp;
                        for (i, &fi) in f.iter().enumerate() {
                            grad[w1_off + j * f.len() + i] += gp * fi;
                            gf[i] += w1[j * f.len() + i] * gp;
                        }
                    }
                    feature_grad = gf;
                } else {
                    feature_grad = g_in;
                }
                Contour::zeros(k, n)
            }
            (HeadCache::NodeMagnitude, Head::NodeMagnitude, Output::Real(go)) => {
                if go.len() != n {
                    return Err(Error::shape(format!(
                        "node head has {n} outputs, gradient has {}",
                        go.len()
                    )));
                }
                let mut g = Contour::zeros(k, n);
                let last = self.last.channel(k - 1);
                for (q, (&z, &gv)) in last.iter().zip(go).enumerate() {
                    let r = z.norm();
                    if r > 0.0 {
                        g.channels_mut()[k - 1][q] = z * (gv / r);
                    }
                }
                g
            }
            (HeadCache::Reconstruction, Head::Reconstruction, Output::Contour(gc)) => {
                gc.check_shape(k, n, "reconstruction gradient")?;
                gc.clone()
            }
            _ => return Err(Error::shape("output gradient does not match the model head")),
        };

        for (i, entry) in self.entries.iter().enumerate().rev() {
            let block = model.layer_block(i);
            g = match entry {
                Entry::Recenter => recenter(&g),
                Entry::Conv { input, taps } => {
                    let LayerSpec::Conv {
                        in_channels,
                        out_channels,
                        kernel_size,
                    } = model.layers()[i]
                    else {
                        unreachable!("tape entry matches layer kind")
                    };
                    let mut gt = vec![Complex64::new(0.0, 0.0); taps.len()];
                    let gin = conv_backward(
                        taps,
                        in_channels,
                        out_channels,
                        kernel_size,
                        input,
                        &g,
                        &mut gt,
                    );
                    let off = params.block(block.expect("conv owns taps")).offset;
                    for (dst, v) in grad[off..].iter_mut().zip(pack_complex(&gt)) {
                        *dst += v;
                    }
                    gin
                }
                Entry::Activation {
                    input,
                    kind,
                    biases,
                } => {
                    let mut bias_grad = vec![0.0; biases.len()];
                    let gin = Contour::from_raw(
                        input
                            .channels()
                            .iter()
                            .zip(g.channels())
                            .enumerate()
                            .map(|(c, (xc, gc))| {
                                xc.iter()
                                    .zip(gc)
                                    .map(|(&z, &gz)| {
                                        let (gi, gb) = activation_backward(*kind, biases[c], z, gz);
                                        bias_grad[c] += gb;
                                        gi
                                    })
                                    .collect()
                            })
                            .collect(),
                    );
                    if let Some(b) = block {
                        let off = params.block(b).offset;
                        for (c, v) in bias_grad.into_iter().enumerate() {
                            grad[off + c] += v;
                        }
                    }
                    gin
                }
                Entry::Coarsen { spec, n_in, picks } => {
                    let p = spec.factor;
                    let mut gin = Contour::zeros(g.k(), *n_in);
                    for (c, gc) in g.channels().iter().enumerate() {
                        let dst = &mut gin.channels_mut()[c];
                        match spec.aggregator {
                            Aggregator::Mean => {
                                for (q, &gv) in gc.iter().enumerate() {
                                    for j in 0..p {
                                        dst[spec.source(*n_in, q, j)] += gv / p as f64;
                                    }
                                }
                            }
                            Aggregator::MagnitudeArgmax => {
                                for (q, &gv) in gc.iter().enumerate() {
                                    dst[picks[c][q]] += gv;
                                }
                            }
                        }
                    }
                    gin
                }
                Entry::Upsample { factor } => Contour::from_raw(
                    g.channels()
                        .iter()
                        .map(|gc| gc.iter().step_by(*factor).copied().collect())
                        .collect(),
                ),
                Entry::Tap {
                    pooled,
                    cache,
                    alpha,
                    offset,
                    recenter: rc,
                } => {
                    let fk = pooled.k();
                    let (mut gp, galpha) =
                        pool_backward(*alpha, pooled, cache, &feature_grad[*offset..*offset + fk]);
                    if *rc {
                        gp = recenter(&gp);
                    }
                    grad[params.block(block.expect("tap owns alpha")).offset] += galpha;
                    for (dst, src) in g.channels_mut().iter_mut().zip(gp.channels()) {
                        for (a, b) in dst.iter_mut().zip(src) {
                            *a += b;
                        }
                    }
                    g
                }
            };
        }
        Ok(grad)
    }
}

/// Loss and exact gradient for one example.
pub fn forward_backward(
    model: &Model,
    input: &Contour,
    extra: &[f64],
    loss: &LossSpec,
    target: &Target<'_>,
) -> Result<(f64, Vec<f64>)> {
    let tape = Tape::record(model, input, extra)?;
    let (value, grad_out) = loss_and_grad(loss, tape.output(), target)?;
    let grad = tape.backward(model, &grad_out)?;
    Ok((value, grad))
}

/// Loss value only.
pub fn forward_loss(
    model: &Model,
    input: &Contour,
    extra: &[f64],
    loss: &LossSpec,
    target: &Target<'_>,
) -> Result<f64> {
    let out = model.forward(input, extra)?;
    crate::optim::compute_loss(loss, &out, target)
}
