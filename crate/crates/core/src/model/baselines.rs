use num_complex::Complex64;

use crate::contour::Contour;
use crate::data::DatasetRecord;
use crate::error::{Error, Result};
use crate::optim::Output;

use super::Predictor;

fn single_channel(x: &Contour) -> Result<&[Complex64]> {
    if x.k() != 1 {
        return Err(Error::shape(format!(
            "curvature baselines take one channel, got {}",
            x.k()
        )));
    }
    if x.n() < 3 {
        return Err(Error::invalid(format!(
            "curvature baselines need at least 3 points, got {}",
            x.n()
        )));
    }
    Ok(x.channel(0))
}

/// Central-difference curvature with spacing `h = perimeter / n`.
pub fn baseline_finite_difference(x: &Contour) -> Result<Vec<f64>> {
    let z = single_channel(x)?;
    let n = z.len();
    let perimeter: f64 = (0..n).map(|q| (z[(q + 1) % n] - z[q]).norm()).sum();
    let h = perimeter / n as f64;
    Ok((0..n)
        .map(|q| {
            let prev = z[(q + n - 1) % n];
            let next = z[(q + 1) % n];
            let d1 = (next - prev) / (2.0 * h);
            let d2 = (next - 2.0 * z[q] + prev) / (h * h);
            let speed_sq = d1.norm_sqr();
            if !(speed_sq >= 1e-12) {
                return 0.0;
            }
            (d1.re * d2.im - d1.im * d2.re).abs() / speed_sq.powf(1.5)
        })
        .collect())
}

/// Inverse circumradius of every three consecutive points.
pub fn baseline_circle_fit(x: &Contour) -> Result<Vec<f64>> {
    let z = single_channel(x)?;
    let n = z.len();
    Ok((0..n)
        .map(|q| {
            let p0 = z[(q + n - 1) % n];
            let p1 = z[q];
            let p2 = z[(q + 1) % n];
            let a = (p1 - p0).norm();
            let b = (p2 - p1).norm();
            let c = (p2 - p0).norm();
            let abc = a * b * c;
            let u = p1 - p0;
            let v = p2 - p0;
            let area = 0.5 * (u.re * v.im - u.im * v.re).abs();
            if abc == 0.0 || area < 1e-14 * abc {
                0.0
            } else {
                4.0 * area / abc
            }
        })
        .collect())
}

/// [`baseline_finite_difference`] as a predictor.
#[derive(Debug, Clone, Copy, Default)]
pub struct FiniteDifference;

/// [`baseline_circle_fit`] as a predictor.
#[derive(Debug, Clone, Copy, Default)]
pub struct CircleFit;

impl Predictor for FiniteDifference {
    fn predict(&self, record: &DatasetRecord) -> Result<Output> {
        baseline_finite_difference(&record.contour).map(Output::Real)
    }
}

impl Predictor for CircleFit {
    fn predict(&self, record: &DatasetRecord) -> Result<Output> {
        baseline_circle_fit(&record.contour).map(Output::Real)
    }
}
