//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 3072 channel-major pixel bytes (1024 red, 1024 green, 1024 blue).

use std::path::Path;

use super::Dataset;
use crate::codec;
use crate::tensor::Tensor;
use crate::{Error, Result};

const RECORD: usize = 3073;
const SIDE: usize = 32;

pub fn load_cifar_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = codec::read_file(path.as_ref())?;
    if bytes.len() % RECORD != 0 {
        return Err(Error::Format {
            what: "cifar binary",
            offset: (bytes.len() / RECORD * RECORD) as u64,
            reason: format!(
                "{} bytes is not a multiple of the {RECORD}-byte record",
                bytes.len()
            ),
        });
    }
    let mut images = Vec::with_capacity(bytes.len() / RECORD);
    let mut labels = Vec::with_capacity(bytes.len() / RECORD);
    for (i, rec) in bytes.chunks_exact(RECORD).enumerate() {
        if rec[0] >= 10 {
            return Err(Error::Format {
                what: "cifar binary",
                offset: (i * RECORD) as u64,
                reason: format!("label {} out of range", rec[0]),
            });
        }
        labels.push(rec[0] as usize);
        images.push(Tensor::new(
            vec![3, SIDE, SIDE],
            rec[1..].iter().map(|&b| b as f64 / 255.0).collect(),
        )?);
    }
    let n = images.len() as u64;
    Dataset::new(images, labels, (0..n).collect(), 10)
}
