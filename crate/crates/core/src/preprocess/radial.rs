use serde::{Deserialize, Serialize};

use super::GrayImage;
use crate::error::{Error, Result};

/// What each pixel contributes to its radial bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialWeighting {
    /// The pixel intensity.
    #[default]
    Intensity,
    /// One per nonzero pixel.
    Count,
}

/// Radial mass distribution around the weighted centroid, in `bins` equal
/// radius bins reaching the farthest contributing pixel, normalized to sum 1.
///
/// Radii are compared exactly in integers (scaled by the total weight), so
/// quarter turns of the image give identical histograms.
pub fn radial_histogram(img: &GrayImage, bins: usize, weighting: RadialWeighting) -> Result<Vec<f64>> {
    if bins == 0 {
        return Err(Error::invalid("radial histogram needs at least one bin"));
    }
    let weight = |p: u8| -> i128 {
        match weighting {
            RadialWeighting::Intensity => p as i128,
            RadialWeighting::Count => (p > 0) as i128,
        }
    };
    let mut pixels = Vec::new();
    let (mut s, mut mx, mut my) = (0i128, 0i128, 0i128);
    for y in 0..img.height() {
        for x in 0..img.width() {
            let w = weight(img.get(x, y));
            if w > 0 {
                pixels.push((x as i128, y as i128, w));
                s += w;
                mx += w * x as i128;
                my += w * y as i128;
            }
        }
    }
    let mut hist = vec![0.0; bins];
    if s == 0 {
        return Ok(hist);
    }
    // squared distance to the centroid, times s^2
    let dist = |x: i128, y: i128| {
        let (dx, dy) = (s * x - mx, s * y - my);
        dx * dx + dy * dy
    };
    let dmax = pixels.iter().map(|&(x, y, _)| dist(x, y)).max().unwrap_or(0);
    let b2 = (bins * bins) as i128;
    for &(x, y, w) in &pixels {
        let bin = if dmax == 0 {
            0
        } else {
            bin_of(dist(x, y), dmax, b2).min(bins - 1)
        };
        hist[bin] += w as f64;
    }
    let total = s as f64;
    for h in &mut hist {
        *h /= total;
    }
    Ok(hist)
}

// Largest b with b^2 * dmax <= b2 * d, i.e. floor(bins * sqrt(d / dmax)).
fn bin_of(d: i128, dmax: i128, b2: i128) -> usize {
    let fits = |b: i128| -> bool {
        match (b * b).checked_mul(dmax).zip(b2.checked_mul(d)) {
            Some((l, r)) => l <= r,
            None => ((b * b) as f64) * (dmax as f64) <= (b2 as f64) * (d as f64),
        }
    };
    let mut b = ((b2 as f64 * d as f64 / dmax as f64).sqrt()) as i128;
    while b > 0 && !fits(b) {
        b -= 1;
    }
    while fits(b + 1) {
        b += 1;
    }
    b as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_fills_bin_zero() {
        let img = GrayImage::from_fn(5, 5, |x, y| if (x, y) == (2, 3) { 200 } else { 0 }).unwrap();
        let h = radial_histogram(&img, 14, RadialWeighting::Intensity).unwrap();
        assert_eq!(h[0], 1.0);
        assert_eq!(h[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn blank_image_gives_zeros() {
        let img = GrayImage::new(3, 3, vec![0; 9]).unwrap();
        assert_eq!(radial_histogram(&img, 4, RadialWeighting::Count).unwrap(), vec![0.0; 4]);
        assert!(radial_histogram(&img, 0, RadialWeighting::Count).is_err());
    }

    #[test]
    fn quarter_turn_is_exact() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x * 31 + y * 17) % 97) as u8 * (x > y) as u8).unwrap();
        for w in [RadialWeighting::Intensity, RadialWeighting::Count] {
            let a = radial_histogram(&img, 14, w).unwrap();
            let b = radial_histogram(&img.rotate90(), 14, w).unwrap();
            assert_eq!(a, b);
            assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bin_search_is_exact() {
        assert_eq!(bin_of(1, 1, 196), 14);
        assert_eq!(bin_of(25, 100, 4), 1);
        assert_eq!(bin_of(24, 100, 4), 0);
    }
}
