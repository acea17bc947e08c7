//! Image datasets: IDX and CIFAR-10 binary ingestion, synthetic shapes, and
//! seeded train/validation/test splitting.

mod cifar;
mod idx;
mod synth;

pub use cifar::load_cifar_binary;
pub use idx::{load_idx, write_idx};
pub use synth::{synth_shapes, SHAPE_KINDS};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;
use crate::{Error, Result};

/// Labelled images with stable identifiers. Pixels lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    images: Vec<Tensor>,
    labels: Vec<usize>,
    ids: Vec<u64>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(
        images: Vec<Tensor>,
        labels: Vec<usize>,
        ids: Vec<u64>,
        num_classes: usize,
    ) -> Result<Self> {
        if images.len() != labels.len() || images.len() != ids.len() {
            return Err(Error::InvalidArgument(format!(
                "dataset lengths differ: {} images, {} labels, {} ids",
                images.len(),
                labels.len(),
                ids.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {l} of sample {} exceeds class count {num_classes}",
                ids[i]
            )));
        }
        if let Some(i) = images
            .iter()
            .position(|t| t.data().iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(Error::InvalidArgument(format!(
                "sample {} has pixels outside [0,1]",
                ids[i]
            )));
        }
        Ok(Self {
            images,
            labels,
            ids,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn images(&self) -> &[Tensor] {
        &self.images
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn image_shape(&self) -> Option<&[usize]> {
        self.images.first().map(Tensor::shape)
    }

    pub fn get(&self, i: usize) -> (&Tensor, usize, u64) {
        (&self.images[i], self.labels[i], self.ids[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tensor, usize, u64)> {
        self.images
            .iter()
            .zip(&self.labels)
            .zip(&self.ids)
            .map(|((x, &y), &id)| (x, y, id))
    }

    /// Samples at the given positions, in that order.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            images: positions.iter().map(|&i| self.images[i].clone()).collect(),
            labels: positions.iter().map(|&i| self.labels[i]).collect(),
            ids: positions.iter().map(|&i| self.ids[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// Samples whose id is in `ids`, in the order given.
    pub fn select_ids(&self, ids: &[u64]) -> Result<Self> {
        let index: std::collections::HashMap<u64, usize> = self
            .ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        let positions = ids
            .iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown sample id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.subset(&positions))
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// The three parts of a split plus any classes a part ended up without.
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// `(split name, class)` pairs for classes absent from a non-empty split.
    pub missing: Vec<(&'static str, usize)>,
}

/// Largest-remainder apportionment of `n` items by `fractions`.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, e) in sizes.iter_mut().zip(&exact) {
        *s = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n - sizes.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if fractions[i] > 0.0 {
            sizes[i] += 1;
            left -= 1;
        }
    }
    sizes
}

/// Seeded permutation followed by contiguous slicing into train/val/test.
///
/// A non-empty split missing a class is logged as a warning, or rejected when
/// `strict` is set.
pub fn split(ds: &Dataset, fractions: [f64; 3], seed: u64, strict: bool) -> Result<Splits> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || fractions.iter().all(|&f| f == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be non-negative, got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [a, b, _] = apportion(ds.len(), &fractions);
    let train = ds.subset(&order[..a]);
    let val = ds.subset(&order[a..a + b]);
    let test = ds.subset(&order[a + b..]);

    let mut missing = Vec::new();
    for (name, part) in [("train", &train), ("val", &val), ("test", &test)] {
        if part.is_empty() {
            continue;
        }
        for (class, &count) in part.class_counts().iter().enumerate() {
            if count == 0 && ds.class_counts()[class] > 0 {
                missing.push((name, class));
            }
        }
    }
    if !missing.is_empty() {
        let msg = format!("classes missing from splits: {missing:?}");
        if strict {
            return Err(Error::InvalidArgument(msg));
        }
        log::warn!("{msg}");
    }
    Ok(Splits {
        train,
        val,
        test,
        missing,
    })
}
