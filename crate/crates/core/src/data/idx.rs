//! Big-endian IDX files as used by MNIST, optionally gzip-compressed (`.gz`).

use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::codec;
use crate::tensor::Tensor;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = codec::read_file(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Format {
            what,
            offset: offset as u64,
            reason: format!("truncated header: file has {} bytes", bytes.len()),
        })
}

fn check_magic(bytes: &[u8], want: u32, what: &'static str) -> Result<()> {
    let magic = be_u32(bytes, 0, what)?;
    if magic != want {
        return Err(Error::Format {
            what,
            offset: 0,
            reason: format!("bad magic 0x{magic:08x}, expected 0x{want:08x}"),
        });
    }
    Ok(())
}

fn check_body(bytes: &[u8], header: usize, need: usize, what: &'static str) -> Result<()> {
    let have = bytes.len() - header;
    if have != need {
        return Err(Error::Format {
            what,
            offset: (header + have.min(need)) as u64,
            reason: format!("header declares {need} payload bytes, file has {have}"),
        });
    }
    Ok(())
}

/// Loads an IDX image file (`0x00000803`) and its label file (`0x00000801`).
/// Pixels are scaled by 1/255; images become `[1, rows, cols]` tensors and ids
/// are record positions. The class count is one more than the largest label.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let img = read_maybe_gz(images_path.as_ref())?;
    let lab = read_maybe_gz(labels_path.as_ref())?;

    check_magic(&img, IMAGES_MAGIC, "idx images")?;
    let n = be_u32(&img, 4, "idx images")? as usize;
    let rows = be_u32(&img, 8, "idx images")? as usize;
    let cols = be_u32(&img, 12, "idx images")? as usize;
    check_magic(&lab, LABELS_MAGIC, "idx labels")?;
    let nl = be_u32(&lab, 4, "idx labels")? as usize;
    if nl != n {
        return Err(Error::Format {
            what: "idx labels",
            offset: 4,
            reason: format!("{nl} labels for {n} images"),
        });
    }
    if n > 0 && (rows == 0 || cols == 0) {
        return Err(Error::Format {
            what: "idx images",
            offset: 8,
            reason: format!("zero image extent {rows}x{cols}"),
        });
    }
    check_body(&img, 16, n * rows * cols, "idx images")?;
    check_body(&lab, 8, n, "idx labels")?;

    let plane = rows * cols;
    let images = img[16..]
        .chunks_exact(plane.max(1))
        .take(n)
        .map(|px| {
            Tensor::new(
                vec![1, rows, cols],
                px.iter().map(|&b| b as f64 / 255.0).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = lab[8..].iter().map(|&b| b as usize).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(images, labels, (0..n as u64).collect(), classes)
}

/// Writes `[rows, cols]` byte images and labels as uncompressed IDX files.
pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    pixels: &[Vec<u8>],
    labels: &[u8],
) -> Result<()> {
    let mut img = Vec::with_capacity(16 + pixels.len() * rows * cols);
    for v in [IMAGES_MAGIC, pixels.len() as u32, rows as u32, cols as u32] {
        img.extend_from_slice(&v.to_be_bytes());
    }
    for p in pixels {
        if p.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "image of {} bytes, expected {}",
                p.len(),
                rows * cols
            )));
        }
        img.extend_from_slice(p);
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    for v in [LABELS_MAGIC, labels.len() as u32] {
        lab.extend_from_slice(&v.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    codec::write_file(images_path.as_ref(), &img)?;
    codec::write_file(labels_path.as_ref(), &lab)
}
