use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{Error, Result};

/// A model prediction, or a gradient with respect to one.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Logits or per-node values.
    Real(Vec<f64>),
    Contour(Contour),
}

impl Output {
    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Output::Real(v) => Some(v),
            Output::Contour(_) => None,
        }
    }

    pub fn as_contour(&self) -> Option<&Contour> {
        match self {
            Output::Contour(c) => Some(c),
            Output::Real(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Class(usize),
    Real(&'a [f64]),
    Contour(&'a Contour),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `-log softmax(logits)[target]`
    CrossEntropy,
    /// Mean over (channel, position) of `|p - t|^2`.
    MseComplex,
    /// Mean of `|p - t|` over real values.
    MaeReal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
}

impl LossSpec {
    pub fn new(kind: LossKind) -> Self {
        LossSpec { kind }
    }
}

pub fn compute_loss(spec: &LossSpec, prediction: &Output, target: &Target<'_>) -> Result<f64> {
    loss_and_grad(spec, prediction, target).map(|(l, _)| l)
}

/// Loss value and its gradient with respect to the prediction. Complex
/// gradients use the `dL/dRe + i dL/dIm` convention.
pub fn loss_and_grad(
    spec: &LossSpec,
    prediction: &Output,
    target: &Target<'_>,
) -> Result<(f64, Output)> {
    match (spec.kind, prediction, target) {
        (LossKind::CrossEntropy, Output::Real(logits), Target::Class(class)) => {
            if logits.is_empty() {
                return Err(Error::shape("cross-entropy needs at least one logit"));
            }
            if *class >= logits.len() {
                return Err(Error::invalid(format!(
                    "class {class} out of range for {} logits",
                    logits.len()
                )));
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
            let z: f64 = exps.iter().sum();
            let loss = z.ln() - (logits[*class] - max);
            let mut grad: Vec<f64> = exps.iter().map(|e| e / z).collect();
            grad[*class] -= 1.0;
            Ok((loss, Output::Real(grad)))
        }
        (LossKind::MseComplex, Output::Contour(p), Target::Contour(t)) => {
            t.check_shape(p.k(), p.n(), "mse target")?;
            let count = (p.k() * p.n()) as f64;
            let mut loss = 0.0;
            let grad = p
                .channels()
                .iter()
                .zip(t.channels())
                .map(|(pc, tc)| {
                    pc.iter()
                        .zip(tc)
                        .map(|(a, b)| {
                            let d = a - b;
                            loss += d.norm_sqr();
                            d * (2.0 / count)
                        })
                        .collect::<Vec<Complex64>>()
                })
                .collect();
            Ok((loss / count, Output::Contour(Contour::from_raw(grad))))
        }
        (LossKind::MaeReal, Output::Real(p), Target::Real(t)) => {
            if p.len() != t.len() || p.is_empty() {
                return Err(Error::shape(format!(
                    "mae needs equal nonempty lengths, got {} and {}",
                    p.len(),
                    t.len()
                )));
            }
            let count = p.len() as f64;
            let loss = p.iter().zip(*t).map(|(a, b)| (a - b).abs()).sum::<f64>() / count;
            let grad = p
                .iter()
                .zip(*t)
                .map(|(a, b)| {
                    let d = a - b;
                    if d > 0.0 {
                        1.0 / count
                    } else if d < 0.0 {
                        -1.0 / count
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok((loss, Output::Real(grad)))
        }
        (kind, _, _) => Err(Error::shape(format!(
            "{kind:?} loss does not accept this prediction/target combination"
        ))),
    }
}
