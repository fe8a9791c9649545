use std::cmp::Ordering;

use super::{BinaryImage, GrayImage};

pub fn histogram(img: &GrayImage) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &p in img.pixels() {
        h[p as usize] += 1;
    }
    h
}

// Compares a/b with c/d exactly by expanding both as continued fractions.
fn cmp_fractions(mut a: u128, mut b: u128, mut c: u128, mut d: u128) -> Ordering {
    let mut flip = false;
    loop {
        let (qa, qc) = (a / b, c / d);
        if qa != qc {
            let o = qa.cmp(&qc);
            return if flip { o.reverse() } else { o };
        }
        let (ra, rc) = (a % b, c % d);
        let o = match (ra == 0, rc == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            (false, false) => {
                (a, b, c, d) = (b, ra, d, rc);
                flip = !flip;
                continue;
            }
        };
        return if flip { o.reverse() } else { o };
    }
}

/// Between-class variance of threshold `t`, scaled by `N^2`, as an exact
/// fraction `D^2 / (w0 w1)` with `D = N S0 - T w0`. None for an empty class.
fn score(w0: u64, s0: u64, n: u64, total: u64) -> Option<(u128, u128)> {
    let w1 = n - w0;
    if w0 == 0 || w1 == 0 {
        return None;
    }
    let d = (n as i128 * s0 as i128 - total as i128 * w0 as i128).unsigned_abs();
    Some((d.checked_mul(d)?, w0 as u128 * w1 as u128))
}

/// Threshold from a 256-bin histogram maximizing the between-class
/// variance of `{<= t}` against `{> t}`; ties go to the lowest `t`. A
/// single-valued histogram returns that value.
pub fn otsu_from_histogram(hist: &[u64; 256]) -> u8 {
    let n: u64 = hist.iter().sum();
    let total: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    let mut best: Option<(u8, (u128, u128))> = None;
    let (mut w0, mut s0) = (0u64, 0u64);
    for t in 0..256usize {
        w0 += hist[t];
        s0 += t as u64 * hist[t];
        let Some(frac) = score(w0, s0, n, total).or_else(|| {
            // overflow fallback: only reachable for enormous images
            let w1 = n - w0;
            (w0 > 0 && w1 > 0).then(|| {
                let d = n as f64 * s0 as f64 - total as f64 * w0 as f64;
                ((d * d / (w0 as f64 * w1 as f64)) as u128, 1)
            })
        }) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((_, (a, b))) => cmp_fractions(frac.0, frac.1, a, b) == Ordering::Greater,
        };
        if better {
            best = Some((t as u8, frac));
        }
    }
    match best {
        Some((t, _)) => t,
        None => hist.iter().position(|&h| h > 0).unwrap_or(0) as u8,
    }
}

pub fn otsu_threshold(img: &GrayImage) -> u8 {
    otsu_from_histogram(&histogram(img))
}

/// Foreground is `pixel > t`, or `pixel <= t` when `invert` is set.
pub fn binarize(img: &GrayImage, t: u8, invert: bool) -> BinaryImage {
    BinaryImage::new(
        img.width(),
        img.height(),
        img.pixels().iter().map(|&p| (p > t) != invert).collect(),
    )
    .expect("same dimensions as a valid image")
}
