//! Standalone SVG figures: loss curves, contour overlays and contours
//! colored by a per-node value.

use std::fmt::Write;

use eqcontour::model::History;
use eqcontour::Contour;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 48.0;
const PALETTE: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

// Maps data coordinates into the plotting area, y up.
struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn new(xs: (f64, f64), ys: (f64, f64), equal: bool) -> Frame {
        let span = |(lo, hi): (f64, f64)| if hi > lo { hi - lo } else { 1.0 };
        let inner = SIZE - 2.0 * MARGIN;
        let (mut sx, mut sy) = (inner / span(xs), inner / span(ys));
        if equal {
            sx = sx.min(sy);
            sy = sx;
        }
        Frame {
            x0: xs.0,
            y0: ys.0,
            sx,
            sy,
        }
    }

    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.x0) * self.sx, SIZE - MARGIN - (y - self.y0) * self.sy)
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// Training and validation loss per epoch.
pub fn loss_curves(history: &History) -> String {
    let mut s = header("loss");
    if history.epochs.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let xs = (0.0, history.epochs.len().saturating_sub(1).max(1) as f64);
    let ys = bounds(history.epochs.iter().flat_map(|e| [e.train_loss, e.val_loss]));
    let frame = Frame::new(xs, (ys.0.min(0.0), ys.1), false);
    let (ax, ay) = frame.map(xs.0, ys.0.min(0.0));
    let _ = writeln!(
        s,
        r##"<polyline points="{ax:.2},{:.2} {ax:.2},{ay:.2} {:.2},{ay:.2}" fill="none" stroke="#444"/>"##,
        MARGIN,
        SIZE - MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{:.4}</text>"#,
        4.0,
        MARGIN,
        ys.1
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">epoch {}</text>"#,
        SIZE - MARGIN,
        SIZE - MARGIN / 2.0,
        history.epochs.len() - 1
    );
    let series: [(&str, fn(&eqcontour::model::EpochStats) -> f64); 2] =
        [("train", |e| e.train_loss), ("validation", |e| e.val_loss)];
    for (i, (name, value)) in series.iter().enumerate() {
        let points: Vec<String> = history
            .epochs
            .iter()
            .map(|e| {
                let (x, y) = frame.map(e.epoch as f64, value(e));
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            points.join(" "),
            PALETTE[i]
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="{}" text-anchor="end">{name}</text>"#,
            SIZE - MARGIN,
            MARGIN + 16.0 * i as f64,
            PALETTE[i]
        );
    }
    if let Some(best) = history.best_epoch {
        let (x, y) = frame.map(best as f64, history.epochs[best].val_loss);
        let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="{}"/>"#, PALETTE[1]);
    }
    s.push_str("</svg>\n");
    s
}

/// Closed polygons of every channel of every shape, one color per shape.
pub fn contour_overlay(title: &str, shapes: &[(&str, &Contour)]) -> String {
    let mut s = header(title);
    let points = || shapes.iter().flat_map(|(_, c)| c.channels().iter().flatten());
    let frame = Frame::new(bounds(points().map(|z| z.re)), bounds(points().map(|z| z.im)), true);
    for (i, (name, shape)) in shapes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for ch in shape.channels() {
            let pts: Vec<String> = ch
                .iter()
                .map(|z| {
                    let (x, y) = frame.map(z.re, z.im);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                pts.join(" ")
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            MARGIN,
            SIZE - 12.0 - 16.0 * (shapes.len() - 1 - i) as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

// Blue to red through white; `t` in [0, 1].
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (r, g, b) = if t < 0.5 {
        let u = t * 2.0;
        (40.0 + 215.0 * u, 80.0 + 175.0 * u, 200.0 + 55.0 * u)
    } else {
        let u = (t - 0.5) * 2.0;
        (255.0 - 30.0 * u, 255.0 - 215.0 * u, 255.0 - 215.0 * u)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

/// Channel 0 of `contour` with each node colored by `values` on a log
/// scale between their 5th and 95th percentiles.
pub fn value_coloring(title: &str, contour: &Contour, values: &[f64]) -> String {
    let mut s = header(title);
    let ch = contour.channel(0);
    let frame = Frame::new(bounds(ch.iter().map(|z| z.re)), bounds(ch.iter().map(|z| z.im)), true);
    let logs: Vec<f64> = values.iter().map(|v| v.abs().max(1e-6).ln()).collect();
    let mut sorted = logs.clone();
    sorted.sort_by(f64::total_cmp);
    let pick = |f: f64| sorted[((sorted.len() - 1) as f64 * f).round() as usize];
    let (lo, hi) = if sorted.is_empty() { (0.0, 1.0) } else { (pick(0.05), pick(0.95)) };
    let n = ch.len();
    for q in 0..n {
        let (x1, y1) = frame.map(ch[q].re, ch[q].im);
        let (x2, y2) = frame.map(ch[(q + 1) % n].re, ch[(q + 1) % n].im);
        let t = if hi > lo { (logs[q] - lo) / (hi - lo) } else { 0.5 };
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{}" stroke-width="4" stroke-linecap="round"/>"#,
            ramp(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">low {:.3}, high {:.3}</text>"#,
        MARGIN,
        SIZE - 12.0,
        lo.exp(),
        hi.exp()
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use eqcontour::model::EpochStats;
    use num_complex::Complex64;

    fn square() -> Contour {
        Contour::from_samples(vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ])
        .unwrap()
    }

    #[test]
    fn figures_are_closed_svg_documents() {
        let history = History {
            epochs: (0..3)
                .map(|epoch| EpochStats {
                    epoch,
                    train_loss: 1.0 / (epoch + 1) as f64,
                    val_loss: 1.5 / (epoch + 1) as f64,
                })
                .collect(),
            best_epoch: Some(2),
            train_size: 9,
            val_size: 1,
        };
        for svg in [
            loss_curves(&history),
            loss_curves(&History::default()),
            contour_overlay("a < b", &[("input", &square()), ("output", &square())]),
            value_coloring("kappa", &square(), &[1.0, 2.0, 3.0, 4.0]),
        ] {
            assert!(svg.starts_with("<svg"));
            assert!(svg.trim_end().ends_with("</svg>"));
            assert!(!svg.contains("NaN"));
        }
        assert_eq!(contour_overlay("t", &[("s", &square())]).matches("<polygon").count(), 1);
        assert!(contour_overlay("a < b", &[]).contains("a &lt; b"));
    }

    #[test]
    fn ramp_spans_blue_to_red() {
        assert_eq!(ramp(0.0), "#2850c8");
        assert_eq!(ramp(1.0), "#e12828");
        assert_eq!(ramp(0.5), "#ffffff");
    }
}
