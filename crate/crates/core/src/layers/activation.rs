use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::contour::Contour;

/// A radial profile `g: [0, inf) -> C`, giving the activation `z -> g(|z|) z`.
#[derive(Clone)]
pub struct RadialProfile(Arc<dyn Fn(f64) -> Complex64 + Send + Sync>);

impl RadialProfile {
    pub fn new(g: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        RadialProfile(Arc::new(g))
    }

    pub fn eval(&self, r: f64) -> Complex64 {
        (self.0)(r)
    }
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("RadialProfile(..)")
    }
}

/// Elementwise activations of the form `a(z) = g(|z|) z`, the only
/// pointwise maps that commute with rotations. All of them send 0 to 0.
#[derive(Debug, Clone)]
pub enum Activation {
    /// `g(r) = 1 / (1 + r)`
    Siglog,
    /// `g(r) = ReLU(r + b) / r`
    ModRelu { bias: f64 },
    /// `g(r) = tanh(r) / r`
    AmplitudePhase,
    Custom(RadialProfile),
}

impl Activation {
    pub fn apply(&self, z: Complex64) -> Complex64 {
        let r = z.norm();
        if r == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            Activation::Siglog => z / (1.0 + r),
            Activation::ModRelu { bias } => {
                let s = r + bias;
                if s > 0.0 {
                    z * (s / r)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Activation::AmplitudePhase => z * (r.tanh() / r),
            Activation::Custom(g) => g.eval(r) * z,
        }
    }
}

/// Applies `spec` to every sample of every channel.
pub fn activation_forward(spec: &Activation, x: &Contour) -> Contour {
    x.map(|z| spec.apply(z))
}

/// Activation kinds usable inside trainable models. ModReLU carries one
/// learned bias per channel in the parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    Siglog,
    ModRelu,
    AmplitudePhase,
}

/// For a real profile `h`, returns `(h(r), h'(r) r)`; `None` for an inactive
/// ModReLU unit.
pub(crate) fn radial_gain(kind: ActivationKind, bias: f64, r: f64) -> Option<(f64, f64)> {
    match kind {
        ActivationKind::Siglog => {
            let d = 1.0 + r;
            Some((1.0 / d, -r / (d * d)))
        }
        ActivationKind::ModRelu => {
            // subgradient 0 at the kink r + b = 0
            if r + bias > 0.0 && r > 0.0 {
                Some(((r + bias) / r, -bias / r))
            } else {
                None
            }
        }
        ActivationKind::AmplitudePhase => {
            if r == 0.0 {
                Some((1.0, 0.0))
            } else {
                let t = r.tanh();
                let sech2 = 1.0 - t * t;
                Some((t / r, sech2 - t / r))
            }
        }
    }
}

/// Backward of `z -> h(|z|) z` for the incoming gradient `g`. Returns the
/// input gradient and the gradient of the ModReLU bias (0 for other kinds).
pub(crate) fn activation_backward(
    kind: ActivationKind,
    bias: f64,
    z: Complex64,
    g: Complex64,
) -> (Complex64, f64) {
    let r = z.norm();
    if r == 0.0 {
        return match kind {
            ActivationKind::ModRelu => (Complex64::new(0.0, 0.0), 0.0),
            _ => {
                let (h, _) = radial_gain(kind, bias, 0.0).unwrap_or((0.0, 0.0));
                (g * h, 0.0)
            }
        };
    }
    match radial_gain(kind, bias, r) {
        None => (Complex64::new(0.0, 0.0), 0.0),
        Some((h, dh_r)) => {
            let u = z / r;
            let radial = (u.conj() * g).re;
            let grad_z = g * h + u * (dh_r * radial);
            let grad_b = if kind == ActivationKind::ModRelu { radial } else { 0.0 };
            (grad_z, grad_b)
        }
    }
}

/// The forward map for a model activation with the given ModReLU bias.
pub(crate) fn apply_kind(kind: ActivationKind, bias: f64, z: Complex64) -> Complex64 {
    match radial_gain(kind, bias, z.norm()) {
        Some((h, _)) if z.norm() > 0.0 => z * h,
        _ => Complex64::new(0.0, 0.0),
    }
}
