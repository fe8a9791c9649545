use num_complex::Complex64;

use crate::contour::Contour;
use crate::error::{Error, Result};

/// Blend weight of the invariant global pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalPoolSpec {
    alpha: f64,
}

impl GlobalPoolSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        Ok(GlobalPoolSpec { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Per channel: `alpha * mean_j |x_i(j)| + (1 - alpha) * max_j |x_i(j)|`.
pub fn global_pool_forward(spec: &GlobalPoolSpec, x: &Contour) -> Vec<f64> {
    pool_apply(spec.alpha, x).0
}

/// Per-channel statistics kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct PoolCache {
    pub means: Vec<f64>,
    pub maxes: Vec<f64>,
    pub argmax: Vec<usize>,
}

pub(crate) fn pool_apply(alpha: f64, x: &Contour) -> (Vec<f64>, PoolCache) {
    let mut means = Vec::with_capacity(x.k());
    let mut maxes = Vec::with_capacity(x.k());
    let mut argmax = Vec::with_capacity(x.k());
    for ch in x.channels() {
        let mut sum = 0.0;
        let mut best = 0;
        let mut best_r = f64::NEG_INFINITY;
        for (j, z) in ch.iter().enumerate() {
            let r = z.norm();
            sum += r;
            if r > best_r {
                best_r = r;
                best = j;
            }
        }
        means.push(sum / ch.len() as f64);
        maxes.push(best_r);
        argmax.push(best);
    }
    let out = means
        .iter()
        .zip(&maxes)
        .map(|(mu, mx)| alpha * mu + (1.0 - alpha) * mx)
        .collect();
    (
        out,
        PoolCache {
            means,
            maxes,
            argmax,
        },
    )
}

/// Gradient of the pool with respect to its input, given feature gradients.
/// Returns the input gradient and `dL/dalpha`.
pub(crate) fn pool_backward(
    alpha: f64,
    x: &Contour,
    cache: &PoolCache,
    grad_features: &[f64],
) -> (Contour, f64) {
    let n = x.n() as f64;
    let mut grad_alpha = 0.0;
    let grad = x
        .channels()
        .iter()
        .enumerate()
        .map(|(i, ch)| {
            let f = grad_features[i];
            grad_alpha += f * (cache.means[i] - cache.maxes[i]);
            let mut g: Vec<Complex64> = ch
                .iter()
                .map(|&z| {
                    let r = z.norm();
                    if r == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        z * (f * alpha / (n * r))
                    }
                })
                .collect();
            let j = cache.argmax[i];
            let r = ch[j].norm();
            if r > 0.0 {
                g[j] += ch[j] * (f * (1.0 - alpha) / r);
            }
            g
        })
        .collect();
    (Contour::from_raw(grad), grad_alpha)
}
