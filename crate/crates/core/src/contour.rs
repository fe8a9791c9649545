//! Contours as complex signals on the cyclic group Z_n, and the action of
//! G_n = Z_n x S^1 on them.
//!
//! A contour with `k` channels and `n` samples is stored channel-major. The
//! group element `(l, w)` shifts the starting point by `l` and rotates every
//! sample by the unit complex number `w`:
//!
//! ```text
//! ((l, w) . x)_c(q) = w * x_c(q - l mod n)
//! ```

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex sample value. Contours never mix in lower precision.
pub type ComplexScalar = Complex64;

/// A `k x n` complex signal; every channel has the same length.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    channels: Vec<Vec<Complex64>>,
}

impl Contour {
    /// Builds a contour, rejecting ragged channels and non-finite samples.
    pub fn new(channels: Vec<Vec<Complex64>>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::shape("contour needs at least one channel"));
        }
        let n = channels[0].len();
        if n == 0 {
            return Err(Error::shape("contour needs at least one sample"));
        }
        for (c, ch) in channels.iter().enumerate() {
            if ch.len() != n {
                return Err(Error::shape(format!(
                    "channel {c} has {} samples, expected {n}",
                    ch.len()
                )));
            }
            if let Some(position) = ch.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(Error::NonFinite {
                    channel: c,
                    position,
                });
            }
        }
        Ok(Contour { channels })
    }

    /// Single-channel contour.
    pub fn from_samples(samples: Vec<Complex64>) -> Result<Self> {
        Self::new(vec![samples])
    }

    /// Single-channel contour from planar points.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        Self::from_samples(points.iter().map(|&(x, y)| Complex64::new(x, y)).collect())
    }

    pub fn zeros(k: usize, n: usize) -> Self {
        assert!(k >= 1 && n >= 1, "contour shape must be positive");
        Contour {
            channels: vec![vec![Complex64::new(0.0, 0.0); n]; k],
        }
    }

    /// Unchecked constructor for layer outputs whose shape is known to be valid.
    pub(crate) fn from_raw(channels: Vec<Vec<Complex64>>) -> Self {
        debug_assert!(!channels.is_empty());
        debug_assert!(channels.iter().all(|c| c.len() == channels[0].len() && !c.is_empty()));
        Contour { channels }
    }

    /// Number of samples per channel.
    pub fn n(&self) -> usize {
        self.channels[0].len()
    }

    /// Number of channels.
    pub fn k(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<Complex64>] {
        &self.channels
    }

    pub(crate) fn channels_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.channels
    }

    pub fn into_channels(self) -> Vec<Vec<Complex64>> {
        self.channels
    }

    pub fn get(&self, c: usize, q: usize) -> Complex64 {
        self.channels[c][q]
    }

    /// Applies `f` to every sample.
    pub fn map(&self, mut f: impl FnMut(Complex64) -> Complex64) -> Contour {
        Contour::from_raw(
            self.channels
                .iter()
                .map(|ch| ch.iter().map(|&z| f(z)).collect())
                .collect(),
        )
    }

    pub fn scale(&self, s: Complex64) -> Contour {
        self.map(|z| z * s)
    }

    /// Largest absolute sample-wise difference; `inf` when shapes differ.
    pub fn max_abs_diff(&self, other: &Contour) -> f64 {
        if self.k() != other.k() || self.n() != other.n() {
            return f64::INFINITY;
        }
        self.channels
            .iter()
            .zip(&other.channels)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
            .fold(0.0, f64::max)
    }

    /// Per-channel arithmetic mean.
    pub fn channel_means(&self) -> Vec<Complex64> {
        self.channels
            .iter()
            .map(|ch| ch.iter().sum::<Complex64>() / ch.len() as f64)
            .collect()
    }

    pub(crate) fn check_shape(&self, k: usize, n: usize, what: &str) -> Result<()> {
        if self.k() != k || self.n() != n {
            return Err(Error::shape(format!(
                "{what}: expected {k}x{n} contour, got {}x{}",
                self.k(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// An element `(l, w)` of G_n = Z_n x S^1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupElement {
    shift: usize,
    rotation: Complex64,
    order: usize,
}

impl GroupElement {
    /// Shift `shift` (any integer, reduced mod `n`) and rotation by `angle` radians.
    pub fn new(shift: i64, angle: f64, n: usize) -> Result<Self> {
        Self::from_unit(shift, Complex64::from_polar(1.0, angle), n)
    }

    /// Like [`GroupElement::new`] but from a complex number, renormalized to unit modulus.
    pub fn from_unit(shift: i64, w: Complex64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("cyclic group order must be positive"));
        }
        let r = w.norm();
        if !r.is_finite() || r < 1e-12 {
            return Err(Error::invalid(format!("rotation {w} cannot be normalized")));
        }
        Ok(GroupElement {
            shift: shift.rem_euclid(n as i64) as usize,
            rotation: w / r,
            order: n,
        })
    }

    pub fn identity(n: usize) -> Self {
        GroupElement {
            shift: 0,
            rotation: Complex64::new(1.0, 0.0),
            order: n.max(1),
        }
    }

    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn rotation(&self) -> Complex64 {
        self.rotation
    }

    /// The `n` of the Z_n factor this element was built for.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Group law: `(l1 + l2, w1 w2)`; acting with the result equals acting
    /// with `other` first, then `self`.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.order != other.order {
            return Err(Error::GroupMismatch {
                left: self.order,
                right: other.order,
            });
        }
        let w = self.rotation * other.rotation;
        Ok(GroupElement {
            shift: (self.shift + other.shift) % self.order,
            rotation: w / w.norm(),
            order: self.order,
        })
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            shift: (self.order - self.shift) % self.order,
            rotation: self.rotation.conj(),
            order: self.order,
        }
    }
}

/// `q -> w * x(q - l)` on every channel. The shift is reduced modulo `x.n()`.
pub fn act(g: &GroupElement, x: &Contour) -> Contour {
    let n = x.n();
    let l = g.shift % n;
    let w = g.rotation;
    Contour::from_raw(
        x.channels
            .iter()
            .map(|ch| (0..n).map(|q| w * ch[(q + n - l) % n]).collect())
            .collect(),
    )
}

/// Cyclic shift `q -> x(q - l)` of a real per-node signal, matching [`act`].
pub fn shift_real(values: &[f64], shift: usize) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let l = shift % n;
    (0..n).map(|q| values[(q + n - l) % n]).collect()
}

/// Subtracts the per-channel mean.
pub fn recenter(x: &Contour) -> Contour {
    let means = x.channel_means();
    Contour::from_raw(
        x.channels
            .iter()
            .zip(means)
            .map(|(ch, mu)| ch.iter().map(|&z| z - mu).collect())
            .collect(),
    )
}

/// How the spread used by [`normalize_with`] is pooled over channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizeScope {
    /// One scale for the whole contour; keeps relative channel sizes.
    #[default]
    Global,
    /// Each channel is rescaled by its own spread.
    PerChannel,
}

/// Centers each channel at its mean and divides by the spread of the
/// centered magnitudes, `sigma = sqrt(mean |x_c(q) - mu_c|^2)`.
pub fn normalize(x: &Contour) -> Result<Contour> {
    normalize_with(x, NormalizeScope::Global)
}

/// The global scale `sigma` that [`normalize`] divides by.
pub fn spread(x: &Contour) -> f64 {
    rms(&recenter(x).channels)
}

fn rms(chs: &[Vec<Complex64>]) -> f64 {
    let count: usize = chs.iter().map(Vec::len).sum();
    let ss: f64 = chs.iter().flatten().map(|z| z.norm_sqr()).sum();
    (ss / count as f64).sqrt()
}

pub fn normalize_with(x: &Contour, scope: NormalizeScope) -> Result<Contour> {
    let centered = recenter(x);
    match scope {
        NormalizeScope::Global => {
            let sigma = rms(&centered.channels);
            if !(sigma >= 1e-12) {
                return Err(Error::DegenerateContour { sigma });
            }
            Ok(centered.map(|z| z / sigma))
        }
        NormalizeScope::PerChannel => {
            let mut out = Vec::with_capacity(centered.k());
            for ch in centered.channels {
                let sigma = rms(std::slice::from_ref(&ch));
                if !(sigma >= 1e-12) {
                    return Err(Error::DegenerateContour { sigma });
                }
                out.push(ch.into_iter().map(|z| z / sigma).collect());
            }
            Ok(Contour::from_raw(out))
        }
    }
}
