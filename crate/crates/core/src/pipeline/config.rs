//! Run configuration, read from TOML.
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{self, Dataset};
use crate::detector::{DetectorConfig, DetectorKind, ThresholdPolicy};
use crate::model::{ModelSpec, TrainConfig};
use crate::mutation::{MutationConfig, Operator, DEFAULT_RATES};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
    Cifar {
        files: Vec<PathBuf>,
    },
    Synth {
        per_class: usize,
        classes: usize,
        #[serde(default)]
        noise: f64,
    },
}

// no deny_unknown_fields here: serde cannot combine it with flatten
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    #[serde(flatten)]
    pub source: DataSource,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    /// Keep only the first `limit` samples.
    #[serde(default)]
    pub limit: Option<usize>,
    /// Fail instead of warn when a split misses a class.
    #[serde(default)]
    pub strict_classes: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributionConfig {
    /// Conv layer name such as `conv2`; the last conv layer when absent.
    #[serde(default)]
    pub layer: Option<String>,
    /// Riemann steps along the path.
    pub steps: usize,
    /// Constant pixel value of the baseline image.
    #[serde(default)]
    pub baseline: f64,
}

fn default_rates() -> Vec<f64> {
    DEFAULT_RATES.to_vec()
}

fn default_count() -> usize {
    100
}

fn default_floor() -> f64 {
    0.9
}

fn default_gf_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationGrid {
    pub operator: Operator,
    #[serde(default = "default_rates")]
    pub rates: Vec<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_floor")]
    pub validity_floor: f64,
    #[serde(default = "default_gf_scale")]
    pub gf_scale: f64,
    /// Mutant counts at which LCR AUROC is recomputed.
    #[serde(default)]
    pub saturation_counts: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnifiedConfig {
    /// Kinds trained for the settings table.
    pub kinds: Vec<DetectorKind>,
    /// Kind whose threshold produces the test-set verdicts.
    pub verdict: DetectorKind,
    /// Folds for the out-of-fold conductance scores of the training split.
    #[serde(default = "default_folds")]
    pub folds: usize,
}

fn default_folds() -> usize {
    5
}

impl Default for UnifiedConfig {
    fn default() -> Self {
        Self {
            kinds: vec![DetectorKind::Mlp2x10, DetectorKind::Lda, DetectorKind::Qda],
            verdict: DetectorKind::Mlp2x10,
            folds: default_folds(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Base seed; every stage derives its own seed from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub data: DataConfig,
    /// Layer stack; the two-conv desk network when absent.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    pub attribution: AttributionConfig,
    pub mutation: MutationGrid,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub unified: UnifiedConfig,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
}

/// Stage-specific seeds, all fixed by the base seed.
#[derive(Clone, Copy, Debug)]
pub struct Seeds {
    pub split: u64,
    pub train: u64,
    pub mutation: u64,
    pub detector: u64,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "config schema version {} is not supported; expected {SCHEMA_VERSION}",
                cfg.schema_version
            )));
        }
        cfg.resolve(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        match &mut self.data.source {
            DataSource::Idx { images, labels } => {
                fix(images);
                fix(labels);
            }
            DataSource::Cifar { files } => files.iter_mut().for_each(fix),
            DataSource::Synth { .. } => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let missing = match &self.data.source {
            DataSource::Idx { images, labels } => {
                [images, labels].into_iter().find(|p| !p.exists()).cloned()
            }
            DataSource::Cifar { files } => {
                if files.is_empty() {
                    return bad("cifar source lists no files".into());
                }
                files.iter().find(|p| !p.exists()).cloned()
            }
            DataSource::Synth { classes, .. } => {
                if !(2..=data::SHAPE_KINDS.len()).contains(classes) {
                    return bad(format!(
                        "synth classes must lie in 2..={}",
                        data::SHAPE_KINDS.len()
                    ));
                }
                None
            }
        };
        if let Some(p) = missing {
            return bad(format!("data file {} does not exist", p.display()));
        }
        if self.data.split.iter().any(|f| !(*f > 0.0)) {
            return bad(format!(
                "data.split fractions must all be positive, got {:?}",
                self.data.split
            ));
        }
        if self.attribution.steps == 0 {
            return bad("attribution.steps must be at least 1".into());
        }
        if self.mutation.rates.is_empty() {
            return bad("mutation.rates is empty".into());
        }
        for &rate in &self.mutation.rates {
            self.mutation_config(rate)
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(&m) = self
            .mutation
            .saturation_counts
            .iter()
            .find(|&&m| m == 0 || m > self.mutation.count)
        {
            return bad(format!(
                "saturation count {m} outside 1..={}",
                self.mutation.count
            ));
        }
        if self.unified.kinds.is_empty() || !self.unified.kinds.contains(&self.unified.verdict) {
            return bad("unified.verdict must be one of unified.kinds".into());
        }
        if self.unified.kinds.contains(&DetectorKind::Mlp2x200) {
            return bad("mlp_2x200 is the conductance detector, not a unified kind".into());
        }
        if self.unified.folds < 2 {
            return bad(format!(
                "unified.folds must be at least 2, got {}",
                self.unified.folds
            ));
        }
        if let Some(spec) = &self.model {
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            split: self.seed,
            train: self.seed.wrapping_add(1),
            mutation: self.seed.wrapping_add(2),
            detector: self.seed.wrapping_add(3),
        }
    }

    pub fn mutation_config(&self, rate: f64) -> MutationConfig {
        MutationConfig {
            operator: self.mutation.operator,
            rate,
            count: self.mutation.count,
            seed: self.seeds().mutation,
            validity_floor: self.mutation.validity_floor,
            gf_scale: self.mutation.gf_scale,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seeds().train,
            ..self.train.clone()
        }
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            seed: self.seeds().detector,
            ..self.detector.clone()
        }
    }

    /// Canonical JSON digest of the resolved configuration. `out_dir` is left
    /// out so that identical runs in different directories hash alike.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("object").remove("out_dir");
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let ds = match &self.data.source {
            DataSource::Idx { images, labels } => data::load_idx(images, labels)?,
            DataSource::Cifar { files } => {
                let parts = files
                    .iter()
                    .map(data::load_cifar_binary)
                    .collect::<Result<Vec<_>>>()?;
                concat(parts)?
            }
            DataSource::Synth {
                per_class,
                classes,
                noise,
            } => data::synth_shapes(*per_class, *classes, *noise, self.seed)?,
        };
        Ok(match self.data.limit {
            Some(n) if n < ds.len() => ds.subset(&(0..n).collect::<Vec<_>>()),
            _ => ds,
        })
    }

    pub fn model_spec(&self, ds: &Dataset) -> Result<ModelSpec> {
        if let Some(spec) = &self.model {
            return Ok(spec.clone());
        }
        let shape = ds
            .image_shape()
            .ok_or_else(|| Error::InvalidArgument("dataset is empty".into()))?;
        Ok(ModelSpec::desk_default(
            [shape[0], shape[1], shape[2]],
            ds.num_classes(),
        ))
    }
}

/// Joins CIFAR batches, renumbering ids so they stay unique.
fn concat(parts: Vec<Dataset>) -> Result<Dataset> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let mut classes = 0;
    for p in parts {
        classes = classes.max(p.num_classes());
        images.extend_from_slice(p.images());
        labels.extend_from_slice(p.labels());
    }
    let ids = (0..images.len() as u64).collect();
    Dataset::new(images, labels, ids, classes)
}
