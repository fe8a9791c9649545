use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::GrayImage;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn format_err(message: impl Into<String>) -> Error {
    Error::Format {
        what: "idx",
        message: message.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(format!("header truncated at byte {at}")))
}

fn payload(bytes: &[u8], header: usize, expected: usize) -> Result<&[u8]> {
    let body = &bytes[header..];
    if body.len() < expected {
        return Err(format_err(format!(
            "payload truncated: expected {expected} bytes, found {}",
            body.len()
        )));
    }
    if body.len() > expected {
        return Err(format_err(format!(
            "{} trailing bytes after payload",
            body.len() - expected
        )));
    }
    Ok(body)
}

/// Unsigned-byte image tensor `count x rows x cols`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<GrayImage>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(format_err(format!("image magic {magic:#010x}, expected 0x00000803")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let size = rows
        .checked_mul(cols)
        .filter(|&s| s > 0)
        .ok_or_else(|| format_err(format!("bad image size {rows}x{cols}")))?;
    let expected = count
        .checked_mul(size)
        .ok_or_else(|| format_err("image count overflows"))?;
    let body = payload(bytes, 16, expected)?;
    body.chunks_exact(size)
        .map(|px| GrayImage::new(cols, rows, px.to_vec()))
        .collect()
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(format_err(format!("label magic {magic:#010x}, expected 0x00000801")));
    }
    let count = be_u32(bytes, 4)? as usize;
    Ok(payload(bytes, 8, count)?.iter().map(|&b| b as usize).collect())
}

/// Reads an image file and its label file, checking that the counts agree.
pub fn read_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(Vec<GrayImage>, Vec<usize>)> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = parse_idx_images(&fs::read(ip).map_err(|e| Error::io(ip, e))?)?;
    let labels = parse_idx_labels(&fs::read(lp).map_err(|e| Error::io(lp, e))?)?;
    if images.len() != labels.len() {
        return Err(format_err(format!(
            "{} images but {} labels",
            images.len(),
            labels.len()
        )));
    }
    Ok((images, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn images(count: u32, rows: u32, cols: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [0x803, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend((0..(count * rows * cols) as usize).map(fill));
        b
    }

    #[test]
    fn parses_one_image() {
        let bytes = images(1, 28, 28, |i| (i % 251) as u8);
        let imgs = parse_idx_images(&bytes).unwrap();
        assert_eq!(imgs.len(), 1);
        assert_eq!((imgs[0].width(), imgs[0].height()), (28, 28));
        assert_eq!(imgs[0].get(3, 1), 31);
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let mut bytes = images(2, 2, 3, |_| 7);
        assert!(parse_idx_images(&bytes[..bytes.len() - 1]).is_err());
        assert!(parse_idx_images(&bytes[..10]).is_err());
        bytes[3] = 0x01;
        assert!(parse_idx_images(&bytes).is_err());
        assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 2, 5]).is_err());
        assert_eq!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 2, 5, 9]).unwrap(), vec![5, 9]);
    }
}
