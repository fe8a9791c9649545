use num_complex::Complex64;

use super::PixelChain;
use crate::contour::Contour;
use crate::error::{Error, Result};

/// `n` points spaced `L / n` apart in arc length along the closed polyline,
/// starting at its first vertex, as `x + iy`.
pub fn resample_equidistant(chain: &PixelChain, n: usize) -> Result<Contour> {
    if n < 3 {
        return Err(Error::invalid(format!("need at least 3 output points, got {n}")));
    }
    let pts: Vec<Complex64> = chain
        .points()
        .iter()
        .map(|&(x, y)| Complex64::new(x, y))
        .collect();
    let m = pts.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for i in 0..m {
        let seg = (pts[(i + 1) % m] - pts[i]).norm();
        cum.push(cum[i] + seg);
    }
    let total = cum[m];
    if !(total > 1e-12) {
        return Err(Error::invalid("chain has zero length"));
    }
    let mut seg = 0;
    let samples = (0..n)
        .map(|q| {
            let s = total * q as f64 / n as f64;
            while seg + 1 < m && cum[seg + 1] <= s {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let a = pts[seg];
            let b = pts[(seg + 1) % m];
            if len > 0.0 {
                a + (b - a) * ((s - cum[seg]) / len)
            } else {
                a
            }
        })
        .collect();
    Contour::from_samples(samples)
}
