//! Oracles shared by the preprocessing tests and the acceptance run.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn int(v: u64) -> BigInt {
    BigInt::from(v)
}

// Textbook between-class variance w0 w1 (mu0 - mu1)^2 with probabilities,
// evaluated exactly; the first maximizing t wins.
pub fn otsu_oracle(hist: &[u64; 256]) -> u8 {
    let n: u64 = hist.iter().sum();
    let nonzero: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if nonzero.len() <= 1 {
        return nonzero.first().copied().unwrap_or(0) as u8;
    }
    let total = BigRational::from_integer(int(n));
    let mut best: Option<(usize, BigRational)> = None;
    for t in 0..256 {
        let (c0, c1): (Vec<usize>, Vec<usize>) = (0..256).filter(|&i| hist[i] > 0).partition(|&i| i <= t);
        if c0.is_empty() || c1.is_empty() {
            continue;
        }
        let stats = |class: &[usize]| {
            let count: u64 = class.iter().map(|&i| hist[i]).sum();
            let sum: u64 = class.iter().map(|&i| i as u64 * hist[i]).sum();
            (
                BigRational::new(int(count), int(1)) / &total,
                BigRational::new(int(sum), int(count)),
            )
        };
        let ((w0, mu0), (w1, mu1)) = (stats(&c0), stats(&c1));
        let diff = mu0 - mu1;
        let var = w0 * w1 * &diff * &diff;
        if best.as_ref().is_none_or(|(_, b)| var > *b) {
            best = Some((t, var));
        }
    }
    best.map_or(0, |(t, _)| t as u8)
}

pub fn random_histogram(rng: &mut ChaCha8Rng) -> [u64; 256] {
    let mut h = [0u64; 256];
    match rng.gen_range(0..4) {
        // a few spikes, where exact ties between gap thresholds are common
        0 => {
            for _ in 0..rng.gen_range(1..=4) {
                h[rng.gen_range(0..256)] += rng.gen_range(1..=5);
            }
        }
        // two symmetric spikes: every t in the gap ties
        1 => {
            let a = rng.gen_range(0..128);
            let c = rng.gen_range(1..100);
            h[a] = c;
            h[255 - a] = c;
        }
        // bimodal mass
        2 => {
            for _ in 0..rng.gen_range(100..2000) {
                let centre = if rng.gen_bool(0.4) { 60.0 } else { 190.0 };
                let v: f64 = centre + rng.gen_range(-40.0..40.0);
                h[v.clamp(0.0, 255.0) as usize] += 1;
            }
        }
        // dense random counts, some very large
        _ => {
            for v in h.iter_mut() {
                if rng.gen_bool(0.5) {
                    *v = rng.gen_range(0..1_000_000_000);
                }
            }
        }
    }
    h
}

// Walks the closed polyline to arc length `s` without cumulative tables.
pub fn point_at(points: &[(f64, f64)], mut s: f64) -> (f64, f64) {
    let m = points.len();
    for i in 0..m {
        let (a, b) = (points[i], points[(i + 1) % m]);
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        if s <= len && len > 0.0 {
            let f = s / len;
            return (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        }
        s -= len;
    }
    points[0]
}

pub fn star_polygon(rng: &mut ChaCha8Rng, m: usize) -> Vec<(f64, f64)> {
    let (cx, cy) = (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
    (0..m)
        .map(|i| {
            let t = std::f64::consts::TAU * (i as f64 + rng.gen_range(0.0..0.8)) / m as f64;
            let r = rng.gen_range(5.0..30.0);
            (cx + r * t.cos(), cy + r * t.sin())
        })
        .collect()
}
