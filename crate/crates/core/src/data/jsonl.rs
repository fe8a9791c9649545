use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::DatasetRecord;
use crate::contour::Contour;
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    id: String,
    channels: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_targets: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f64>>,
}

// Writes every float with 17 significant digits, enough to round-trip f64.
struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

pub fn write_jsonl_to<W: Write>(records: &[DatasetRecord], writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io_err = |e: io::Error| Error::io("<writer>", e);
    for r in records {
        r.validate()?;
        let line = Line {
            id: r.id.clone(),
            channels: r
                .contour
                .channels()
                .iter()
                .map(|c| c.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            label: r.label,
            node_targets: r.node_targets.clone(),
            features: r.features.clone(),
        };
        let mut ser = serde_json::Serializer::with_formatter(&mut w, FullPrecision);
        line.serialize(&mut ser)
            .map_err(|e| Error::Format {
                what: "jsonl",
                message: e.to_string(),
            })?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_jsonl(records: &[DatasetRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_jsonl_to(records, file).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

/// Parses one record per nonblank line. Errors carry the 1-based line number.
pub fn read_jsonl_from<R: Read>(reader: R) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let raw: Line = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
        let channels = raw
            .channels
            .into_iter()
            .map(|c| c.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            .collect();
        let contour = Contour::new(channels).map_err(|e| parse_err(e.to_string()))?;
        let record = DatasetRecord {
            id: raw.id,
            contour,
            label: raw.label,
            node_targets: raw.node_targets,
            features: raw.features,
        };
        record.validate().map_err(|e| parse_err(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_from(file)
}
