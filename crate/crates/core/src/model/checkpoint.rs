use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Head, LayerSpec, Model, ModelMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EQCNTCKP";
const VERSION: u32 = 1;

// Layout: magic, u32 version, u64 header length, JSON header, then the
// parameters as little-endian f64. All integers are little-endian.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    input_k: usize,
    input_n: usize,
    extra_features: usize,
    layers: Vec<LayerSpec>,
    head: Head,
    meta: ModelMeta,
    output_shape: (usize, usize),
    num_params: usize,
}

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        message: message.into(),
    }
}

pub fn write_checkpoint<W: Write>(model: &Model, mut w: W) -> Result<()> {
    let header = Header {
        input_k: model.input_k(),
        input_n: model.input_n(),
        extra_features: model.extra_features(),
        layers: model.layers().to_vec(),
        head: model.head(),
        meta: model.meta(),
        output_shape: model.output_shape(),
        num_params: model.num_params(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| format_err(e.to_string()))?;
    let mut bytes = Vec::with_capacity(20 + json.len() + 8 * model.num_params());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    for v in model.params().values() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io("<writer>", e))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Model> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<reader>", e))?;
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(format_err("missing checkpoint magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let json = bytes
        .get(20..20usize.saturating_add(header_len))
        .ok_or_else(|| format_err("header truncated"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| format_err(e.to_string()))?;
    let mut model = Model::new(
        header.input_k,
        header.input_n,
        header.extra_features,
        header.layers,
        header.head,
        header.meta,
    )?;
    if model.num_params() != header.num_params || model.output_shape() != header.output_shape {
        return Err(format_err("header disagrees with the rebuilt model"));
    }
    let payload = &bytes[20 + header_len..];
    if payload.len() != 8 * header.num_params {
        return Err(format_err(format!(
            "expected {} parameter bytes, found {}",
            8 * header.num_params,
            payload.len()
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    model.params_mut().set_values(&values);
    Ok(model)
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(model, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_classifier, ClassifierConfig};

    fn model() -> Model {
        let cfg = ClassifierConfig {
            widths: vec![2, 3],
            hidden: Some(4),
            aux_features: 2,
            ..Default::default()
        };
        let mut m = build_classifier(16, 2, 3, &cfg).unwrap();
        m.init_random(7);
        m.params_mut().values_mut()[0] = -0.0;
        m.params_mut().values_mut()[1] = f64::MIN_POSITIVE / 3.0;
        m
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_checkpoint(&m, &mut buf).unwrap();
        let back = read_checkpoint(&buf[..]).unwrap();
        let bits = |m: &Model| m.params().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
        assert_eq!(back, m);
    }

    #[test]
    fn corrupt_input_is_an_error() {
        let mut buf = Vec::new();
        write_checkpoint(&model(), &mut buf).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        assert!(read_checkpoint(&buf[..10]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
        let mut bad = buf;
        bad[8] = 9;
        assert!(read_checkpoint(&bad[..]).is_err());
    }
}
