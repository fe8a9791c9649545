use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::circular_convolution;

/// Kernel recovered from a black-box map, and how well the map agreed with
/// convolution by it on random probes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelExtraction {
    pub kernel: Vec<Complex64>,
    /// Largest `|T(x) - (y * x)|`, relative to `max(1, |T(x)|_inf)`, over the probes.
    pub residual: f64,
}

/// Tolerance on the probe residual.
pub const KERNEL_TOLERANCE: f64 = 1e-9;

/// A linear map on length-`n` signals that commutes with shifts is
/// convolution by its response to the delta at 0. Returns `y = T(delta_0)`
/// after checking `T(x) = y * x` on `probes` random inputs; a map failing
/// that check is reported as [`Error::NotConvolutional`].
pub fn extract_convolution_kernel<T>(
    map: T,
    n: usize,
    probes: usize,
    seed: u64,
) -> Result<KernelExtraction>
where
    T: Fn(&[Complex64]) -> Vec<Complex64>,
{
    if n == 0 {
        return Err(Error::invalid("signal length must be positive"));
    }
    let apply = |x: &[Complex64]| -> Result<Vec<Complex64>> {
        let y = map(x);
        if y.len() != n {
            return Err(Error::shape(format!(
                "map returned {} samples for a length-{n} input",
                y.len()
            )));
        }
        Ok(y)
    };
    let mut delta = vec![Complex64::new(0.0, 0.0); n];
    delta[0] = Complex64::new(1.0, 0.0);
    let kernel = apply(&delta)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual: f64 = 0.0;
    for _ in 0..probes {
        let x: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let got = apply(&x)?;
        let want = circular_convolution(&kernel, &x)?;
        let scale = got.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        residual = residual.max(err / scale);
    }
    if !(residual <= KERNEL_TOLERANCE) {
        return Err(Error::NotConvolutional { residual });
    }
    Ok(KernelExtraction { kernel, residual })
}

/// The map `x -> y * x` for a fixed kernel.
pub fn convolution_map(kernel: Vec<Complex64>) -> impl Fn(&[Complex64]) -> Vec<Complex64> {
    move |x| circular_convolution(&kernel, x).expect("kernel and signal lengths agree")
}
