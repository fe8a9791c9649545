use std::collections::VecDeque;

use super::BinaryImage;
use crate::error::{Error, Result};

/// Closed loop of boundary points `(x, y)` = (column, row); the last point
/// connects back to the first.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelChain {
    points: Vec<(f64, f64)>,
}

impl PixelChain {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::invalid(format!(
                "a closed chain needs at least 3 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::invalid("chain points must be finite"));
        }
        Ok(PixelChain { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shoelace area, positive for the orientation this module normalizes to.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        0.5 * (0..n)
            .map(|i| {
                let (x0, y0) = self.points[i];
                let (x1, y1) = self.points[(i + 1) % n];
                x0 * y1 - x1 * y0
            })
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Total length of the closed polyline.
    pub fn length(&self) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (x0, y0) = self.points[i];
                let (x1, y1) = self.points[(i + 1) % n];
                (x1 - x0).hypot(y1 - y0)
            })
            .sum()
    }

    /// Same loop traversed the other way, still starting at the first point.
    pub fn reversed(&self) -> PixelChain {
        let mut points = vec![self.points[0]];
        points.extend(self.points[1..].iter().rev());
        PixelChain { points }
    }
}

// Moore neighbourhood in clockwise screen order (y grows downwards), from west.
const DIRS: [(i64, i64); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack is always a Moore neighbour")
}

/// Moore-neighbour tracing from `start`, whose west neighbour must be
/// background, stopped by Jacob's criterion (start re-entered from the
/// initial backtrack).
fn trace_from(img: &BinaryImage, start: (i64, i64)) -> Vec<(i64, i64)> {
    let mut chain = vec![start];
    let mut p = start;
    let mut back = dir_index(-1, 0);
    let start_back = back;
    let limit = 8 * img.width() * img.height() + 8;
    for _ in 0..limit {
        let mut next = None;
        for i in 1..=8 {
            let d = (back + i) % 8;
            let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            if img.at(q.0, q.1) {
                let prev = (back + i - 1) % 8;
                let b = (p.0 + DIRS[prev].0, p.1 + DIRS[prev].1);
                next = Some((q, dir_index(b.0 - q.0, b.1 - q.1)));
                break;
            }
        }
        let Some((q, b)) = next else {
            // isolated pixel
            return chain;
        };
        p = q;
        back = b;
        if p == start && back == start_back {
            break;
        }
        chain.push(p);
    }
    chain
}

/// All outer boundaries of 8-connected foreground components, one per
/// component in raster order of the component's first pixel.
pub fn trace_boundaries(img: &BinaryImage) -> Vec<Vec<(i64, i64)>> {
    let (w, h) = (img.width(), img.height());
    let mut seen = vec![false; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if !img.get(x, y) || seen[y * w + x] {
                continue;
            }
            seen[y * w + x] = true;
            queue.push_back((x as i64, y as i64));
            while let Some((cx, cy)) = queue.pop_front() {
                for (dx, dy) in DIRS {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if img.at(nx, ny) && !seen[ny as usize * w + nx as usize] {
                        seen[ny as usize * w + nx as usize] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            out.push(trace_from(img, (x as i64, y as i64)));
        }
    }
    out
}

/// Outer boundary with the largest shoelace area, oriented so that its
/// signed area is positive. Chains shorter than 3 points are ignored.
pub fn extract_largest_contour(img: &BinaryImage) -> Result<PixelChain> {
    let mut best: Option<PixelChain> = None;
    for chain in trace_boundaries(img) {
        if chain.len() < 3 {
            continue;
        }
        let c = PixelChain::new(chain.iter().map(|&(x, y)| (x as f64, y as f64)).collect())?;
        if best.as_ref().is_none_or(|b| c.area() > b.area()) {
            best = Some(c);
        }
    }
    let chain = best.ok_or(Error::NoContour)?;
    Ok(if chain.signed_area() < 0.0 {
        chain.reversed()
    } else {
        chain
    })
}
