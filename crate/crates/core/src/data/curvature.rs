use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

use super::DatasetRecord;
use crate::contour::Contour;
use crate::error::{Error, Result};

/// Closed curve `x(t) + i y(t)` with `x(t) = sum_k ax_k cos kt + bx_k sin kt`
/// (likewise for `y`), `k = 1..=modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    ax: Vec<f64>,
    bx: Vec<f64>,
    ay: Vec<f64>,
    by: Vec<f64>,
}

impl FourierCurve {
    /// Any finite coefficients are accepted; the dataset generator draws
    /// them from `[-1, 1]`.
    pub fn new(ax: Vec<f64>, bx: Vec<f64>, ay: Vec<f64>, by: Vec<f64>) -> Result<Self> {
        let m = ax.len();
        if m == 0 || bx.len() != m || ay.len() != m || by.len() != m {
            return Err(Error::invalid(format!(
                "coefficient arrays must share a positive length, got {}/{}/{}/{}",
                ax.len(),
                bx.len(),
                ay.len(),
                by.len()
            )));
        }
        if ax.iter().chain(&bx).chain(&ay).chain(&by).any(|v| !v.is_finite()) {
            return Err(Error::invalid("curve coefficients must be finite"));
        }
        Ok(FourierCurve { ax, bx, ay, by })
    }

    /// Draws `modes` modes with coefficients uniform on `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, modes: usize) -> Self {
        let mut draw = || (0..modes).map(|_| rng.gen_range(-1.0..=1.0)).collect::<Vec<f64>>();
        // draw order per mode block: ax, bx, ay, by
        let (ax, bx, ay, by) = (draw(), draw(), draw(), draw());
        FourierCurve { ax, bx, ay, by }
    }

    pub fn modes(&self) -> usize {
        self.ax.len()
    }

    /// `(gamma, gamma', gamma'')` at parameter `t`.
    pub fn derivatives(&self, t: f64) -> (Complex64, Complex64, Complex64) {
        let step = Complex64::from_polar(1.0, t);
        let mut e = Complex64::new(1.0, 0.0);
        let (mut p, mut d1, mut d2) = (Complex64::default(), Complex64::default(), Complex64::default());
        for k in 0..self.modes() {
            e *= step;
            let (c, s) = (e.re, e.im);
            let kf = (k + 1) as f64;
            let x = self.ax[k] * c + self.bx[k] * s;
            let y = self.ay[k] * c + self.by[k] * s;
            let dx = kf * (self.bx[k] * c - self.ax[k] * s);
            let dy = kf * (self.by[k] * c - self.ay[k] * s);
            p += Complex64::new(x, y);
            d1 += Complex64::new(dx, dy);
            d2 -= Complex64::new(x, y) * (kf * kf);
        }
        (p, d1, d2)
    }

    pub fn point(&self, t: f64) -> Complex64 {
        self.derivatives(t).0
    }
}

/// `|x'y'' - y'x''| / (x'^2 + y'^2)^(3/2)` from the analytic derivatives.
pub fn analytic_curvature(curve: &FourierCurve, t: f64) -> Result<f64> {
    let (_, d1, d2) = curve.derivatives(t);
    let speed_sq = d1.norm_sqr();
    if !(speed_sq >= 1e-12) {
        return Err(Error::Cusp { t, speed_sq });
    }
    Ok((d1.re * d2.im - d1.im * d2.re).abs() / speed_sq.powf(1.5))
}

/// Parameters `t_j = 2 pi j / grid`, `j = 0..=grid`, and the cumulative
/// polyline length through `gamma(t_j)`.
pub fn arc_length_table(curve: &FourierCurve, grid: usize) -> (Vec<f64>, Vec<f64>) {
    let ts: Vec<f64> = (0..=grid).map(|j| TAU * j as f64 / grid as f64).collect();
    let mut cum = Vec::with_capacity(grid + 1);
    let mut total = 0.0;
    let mut prev = curve.point(0.0);
    cum.push(0.0);
    for &t in &ts[1..] {
        let p = curve.point(t);
        total += (p - prev).norm();
        cum.push(total);
        prev = p;
    }
    (ts, cum)
}

/// `count` parameters whose points are equally spaced in arc length,
/// starting at `t = 0`, by linear interpolation in the arc-length table.
pub fn equidistant_parameters(curve: &FourierCurve, count: usize, grid: usize) -> Vec<f64> {
    let (ts, cum) = arc_length_table(curve, grid);
    let total = cum[grid];
    let mut j = 0;
    (0..count)
        .map(|q| {
            let s = total * q as f64 / count as f64;
            while j + 1 < grid && cum[j + 1] <= s {
                j += 1;
            }
            let span = cum[j + 1] - cum[j];
            let frac = if span > 0.0 { (s - cum[j]) / span } else { 0.0 };
            ts[j] + frac * (ts[j + 1] - ts[j])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureConfig {
    pub points: usize,
    pub grid: usize,
    pub max_curvature: f64,
    pub max_redraws: usize,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        CurvatureConfig {
            points: 100,
            grid: 10_000,
            max_curvature: 1000.0,
            max_redraws: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedDataset {
    pub records: Vec<DatasetRecord>,
    /// Curves discarded for a cusp or excessive curvature.
    pub rejected: usize,
}

pub fn generate_curvature_dataset(count: usize, seed: u64) -> Result<GeneratedDataset> {
    generate_curvature_dataset_with(count, seed, &CurvatureConfig::default())
}

/// Record `i` draws from its own ChaCha stream `i` under `seed`, so records
/// do not depend on each other. Labels are `modes - 2`.
pub fn generate_curvature_dataset_with(
    count: usize,
    seed: u64,
    cfg: &CurvatureConfig,
) -> Result<GeneratedDataset> {
    if count == 0 {
        return Err(Error::invalid("dataset size must be at least 1"));
    }
    if cfg.points < 3 || cfg.grid < cfg.points {
        return Err(Error::invalid("need at least 3 points and a grid at least as fine"));
    }
    let mut records = Vec::with_capacity(count);
    let mut rejected = 0;
    for index in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut attempts = 0;
        let record = loop {
            if attempts >= cfg.max_redraws {
                return Err(Error::GeneratorExhausted { index, attempts });
            }
            attempts += 1;
            let modes = rng.gen_range(2..=5);
            let curve = FourierCurve::random(&mut rng, modes);
            match sample_curve(&curve, cfg) {
                Some((points, kappa)) => {
                    let contour = Contour::from_samples(points)?;
                    break DatasetRecord::new(format!("curvature-{index:06}"), contour)
                        .with_label(modes - 2)
                        .with_node_targets(kappa)?;
                }
                None => rejected += 1,
            }
        };
        records.push(record);
    }
    Ok(GeneratedDataset { records, rejected })
}

// Points and curvatures at the sampled parameters, or None if any of them
// is a cusp or bends more sharply than the limit.
fn sample_curve(curve: &FourierCurve, cfg: &CurvatureConfig) -> Option<(Vec<Complex64>, Vec<f64>)> {
    let ts = equidistant_parameters(curve, cfg.points, cfg.grid);
    let mut points = Vec::with_capacity(ts.len());
    let mut kappa = Vec::with_capacity(ts.len());
    for t in ts {
        let k = analytic_curvature(curve, t).ok()?;
        if !(k <= cfg.max_curvature) {
            return None;
        }
        points.push(curve.point(t));
        kappa.push(k);
    }
    Some((points, kappa))
}
