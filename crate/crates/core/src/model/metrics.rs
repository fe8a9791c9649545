use crate::contour::Contour;
use crate::data::DatasetRecord;
use crate::error::{Error, Result};
use crate::optim::{compute_loss, LossKind, LossSpec, Output, Target};
use crate::preprocess::BinaryImage;

use super::{Model, TaskKind};

/// Anything that maps a record to a prediction: trained models, the
/// classical baselines, or plain closures.
pub trait Predictor {
    fn predict(&self, record: &DatasetRecord) -> Result<Output>;

    /// The contour a reconstruction is scored against.
    fn reference(&self, record: &DatasetRecord) -> Result<Contour> {
        Ok(record.contour.clone())
    }
}

impl<F> Predictor for F
where
    F: Fn(&DatasetRecord) -> Result<Output>,
{
    fn predict(&self, record: &DatasetRecord) -> Result<Output> {
        self(record)
    }
}

impl Model {
    /// Auxiliary features a record supplies to this model.
    pub(crate) fn record_extra<'a>(&self, record: &'a DatasetRecord) -> Result<&'a [f64]> {
        if self.extra_features() == 0 {
            return Ok(&[]);
        }
        match &record.features {
            Some(f) => Ok(f),
            None => Err(Error::Dataset(format!(
                "record '{}' has no auxiliary features but the model expects {}",
                record.id,
                self.extra_features()
            ))),
        }
    }
}

impl Predictor for Model {
    /// Node regression outputs are converted back to the record's units.
    fn predict(&self, record: &DatasetRecord) -> Result<Output> {
        let (x, scale) = self.prepare(&record.contour)?;
        Ok(match (self.meta().task, self.forward(&x, self.record_extra(record)?)?) {
            (TaskKind::Regress, Output::Real(v)) => Output::Real(v.into_iter().map(|p| p / scale).collect()),
            (_, out) => out,
        })
    }

    /// Reconstructions live in the model's normalized input frame.
    fn reference(&self, record: &DatasetRecord) -> Result<Contour> {
        self.prepare_input(&record.contour)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    TestErrorPct,
    Mae,
    Mse,
    Iou { raster: usize },
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::TestErrorPct => "test_error_pct",
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::Iou { .. } => "iou",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    /// `accuracy`, `test_error_pct`, `mae`, `mse`, `iou` (raster 64) or `iou:<raster>`.
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "accuracy" => Metric::Accuracy,
            "test_error_pct" => Metric::TestErrorPct,
            "mae" => Metric::Mae,
            "mse" => Metric::Mse,
            "iou" => Metric::Iou { raster: 64 },
            other => match other.strip_prefix("iou:").map(str::parse) {
                Some(Ok(raster)) => Metric::Iou { raster },
                _ => return Err(Error::invalid(format!("unknown metric '{other}'"))),
            },
        })
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn real_prediction<'a>(out: &'a Output, record: &DatasetRecord) -> Result<&'a [f64]> {
    out.as_real().ok_or_else(|| {
        Error::Dataset(format!(
            "record '{}': metric needs a real-valued prediction",
            record.id
        ))
    })
}

fn node_targets(record: &DatasetRecord) -> Result<&[f64]> {
    record
        .node_targets
        .as_deref()
        .ok_or_else(|| Error::Dataset(format!("record '{}' has no node targets", record.id)))
}

/// Scores `predictor` on `records`. Per-node errors are averaged within a
/// record first, then over records.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, records: &[DatasetRecord], metric: Metric) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Dataset("cannot evaluate on an empty dataset".into()));
    }
    let mut total = 0.0;
    for r in records {
        let out = predictor.predict(r)?;
        total += match metric {
            Metric::Accuracy | Metric::TestErrorPct => {
                let label = r
                    .label
                    .ok_or_else(|| Error::Dataset(format!("record '{}' has no label", r.id)))?;
                (argmax(real_prediction(&out, r)?) == label) as u8 as f64
            }
            Metric::Mae | Metric::Mse => match &out {
                Output::Real(p) => {
                    let t = node_targets(r)?;
                    if p.len() != t.len() || p.is_empty() {
                        return Err(Error::shape(format!(
                            "record '{}': {} predictions for {} targets",
                            r.id,
                            p.len(),
                            t.len()
                        )));
                    }
                    let err = |a: f64, b: f64| {
                        if metric == Metric::Mae {
                            (a - b).abs()
                        } else {
                            (a - b) * (a - b)
                        }
                    };
                    p.iter().zip(t).map(|(&a, &b)| err(a, b)).sum::<f64>() / p.len() as f64
                }
                Output::Contour(_) => {
                    if metric == Metric::Mae {
                        return Err(Error::invalid("mae needs real-valued predictions"));
                    }
                    let reference = predictor.reference(r)?;
                    compute_loss(
                        &LossSpec::new(LossKind::MseComplex),
                        &out,
                        &Target::Contour(&reference),
                    )?
                }
            },
            Metric::Iou { raster } => {
                let pred = out.as_contour().ok_or_else(|| {
                    Error::Dataset(format!("record '{}': iou needs a contour prediction", r.id))
                })?;
                let reference = predictor.reference(r)?;
                iou(IouShape::Contour(pred), IouShape::Contour(&reference), raster)?
            }
        };
    }
    let mean = total / records.len() as f64;
    Ok(if metric == Metric::TestErrorPct {
        100.0 * (1.0 - mean)
    } else {
        mean
    })
}

#[derive(Debug, Clone, Copy)]
pub enum IouShape<'a> {
    /// Filled by the even-odd rule; multiple channels are united.
    Contour(&'a Contour),
    Mask(&'a BinaryImage),
}

/// Rasterizes closed polygons (one per channel, filled even-odd and united
/// per contour) onto a shared `raster x raster` grid spanning their joint
/// bounding box plus a 5% margin per side. Pixels are sampled at centers.
pub fn rasterize_polygons(shapes: &[&Contour], raster: usize) -> Result<Vec<BinaryImage>> {
    if raster == 0 {
        return Err(Error::invalid("raster must be positive"));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for s in shapes {
        for z in s.channels().iter().flatten() {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
    }
    let pad = |lo: f64, hi: f64| {
        let w = if hi > lo { hi - lo } else { 1.0 };
        (lo - 0.05 * w, (hi - lo).max(0.0) + 0.1 * w)
    };
    let (ox, wx) = pad(x0, x1);
    let (oy, wy) = pad(y0, y1);
    let (dx, dy) = (wx / raster as f64, wy / raster as f64);
    shapes
        .iter()
        .map(|s| {
            let mut bits = vec![false; raster * raster];
            for ch in s.channels() {
                let m = ch.len();
                let mut inside = vec![false; raster * raster];
                let mut xs = Vec::new();
                for row in 0..raster {
                    let py = oy + (row as f64 + 0.5) * dy;
                    xs.clear();
                    for i in 0..m {
                        let (a, b) = (ch[i], ch[(i + 1) % m]);
                        if (a.im > py) != (b.im > py) {
                            xs.push(a.re + (py - a.im) * (b.re - a.re) / (b.im - a.im));
                        }
                    }
                    xs.sort_by(f64::total_cmp);
                    for pair in xs.chunks_exact(2) {
                        for col in 0..raster {
                            let px = ox + (col as f64 + 0.5) * dx;
                            if px >= pair[0] && px < pair[1] {
                                inside[row * raster + col] = !inside[row * raster + col];
                            }
                        }
                    }
                }
                for (b, i) in bits.iter_mut().zip(inside) {
                    *b |= i;
                }
            }
            BinaryImage::new(raster, raster, bits)
        })
        .collect()
}

/// Intersection over union; an empty union scores 0.
pub fn iou(a: IouShape<'_>, b: IouShape<'_>, raster: usize) -> Result<f64> {
    let (ma, mb) = match (a, b) {
        (IouShape::Contour(p), IouShape::Contour(q)) => {
            if raster < 16 {
                return Err(Error::invalid(format!("raster must be at least 16, got {raster}")));
            }
            let mut masks = rasterize_polygons(&[p, q], raster)?;
            let mb = masks.pop().expect("two masks");
            (masks.pop().expect("two masks"), mb)
        }
        (IouShape::Mask(p), IouShape::Mask(q)) => {
            if (p.width(), p.height()) != (q.width(), q.height()) {
                return Err(Error::shape("masks must share dimensions"));
            }
            (p.clone(), q.clone())
        }
        _ => return Err(Error::invalid("cannot compare a contour with a mask")),
    };
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &q) in ma.bits().iter().zip(mb.bits()) {
        inter += (p && q) as usize;
        union += (p || q) as usize;
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}
