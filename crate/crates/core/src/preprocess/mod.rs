//! Image-to-contour pipeline: Otsu binarization, outer-boundary tracing,
//! arc-length resampling and normalization, plus the radial histogram
//! feature.

mod image;
mod otsu;
mod radial;
mod resample;
mod trace;

pub use image::{encode_pgm, parse_pgm, read_pgm, read_raw, write_pgm, BinaryImage, GrayImage};
pub use otsu::{binarize, histogram, otsu_from_histogram, otsu_threshold};
pub use radial::{radial_histogram, RadialWeighting};
pub use resample::resample_equidistant;
pub use trace::{extract_largest_contour, trace_boundaries, PixelChain};

use crate::contour::{normalize, Contour};
use crate::error::Result;

/// Binarizes with Otsu's threshold, keeps the largest outer boundary and
/// resamples it to `n` points, in pixel coordinates.
pub fn image_to_points(img: &GrayImage, n: usize, invert: bool) -> Result<Contour> {
    let bin = binarize(img, otsu_threshold(img), invert);
    let chain = extract_largest_contour(&bin)?;
    resample_equidistant(&chain, n)
}

/// [`image_to_points`] followed by centering and rescaling.
pub fn image_to_contour(img: &GrayImage, n: usize, invert: bool) -> Result<Contour> {
    normalize(&image_to_points(img, n, invert)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn disc(size: usize, cx: f64, cy: f64, r: f64) -> GrayImage {
        GrayImage::from_fn(size, size, |x, y| {
            let d = (x as f64 - cx).hypot(y as f64 - cy);
            if d <= r {
                220
            } else {
                15
            }
        })
        .unwrap()
    }

    #[test]
    fn disc_becomes_a_circle() {
        let (cx, cy, r) = (20.3, 19.6, 12.0);
        let pts = image_to_points(&disc(40, cx, cy, r), 64, false).unwrap();
        for z in pts.channel(0) {
            let d = (z.re - cx).hypot(z.im - cy);
            assert!((d - r).abs() <= 1.5, "radius {d}");
        }
    }

    #[test]
    fn deterministic_and_normalized() {
        let img = disc(32, 15.0, 16.0, 9.0);
        let a = image_to_contour(&img, 32, false).unwrap();
        assert_eq!(a, image_to_contour(&img, 32, false).unwrap());
        let mean: num_complex::Complex64 = a.channel(0).iter().sum();
        assert!(mean.norm() < 1e-12);
    }

    #[test]
    fn blank_image_has_no_contour() {
        let img = GrayImage::new(8, 8, vec![0; 64]).unwrap();
        assert!(matches!(image_to_contour(&img, 16, false), Err(Error::NoContour)));
    }
}
