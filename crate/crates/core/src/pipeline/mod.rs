//! End-to-end runs driven by a [`RunConfig`].
//!
//! Stages run in a fixed order and record their artifacts, with SHA-256
//! digests, in `manifest.json` inside the output directory. A resumed run skips
//! every leading stage whose artifacts still match the manifest; the first
//! stage that has to run invalidates everything after it.

mod config;
mod manifest;
mod report;
mod scores;
mod stages;
mod svg;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

pub use config::{
    AttributionConfig, DataConfig, DataSource, MutationGrid, RunConfig, Seeds, UnifiedConfig,
    SCHEMA_VERSION,
};
pub use manifest::{file_digest, Artifact, RunManifest, StageFailure, StageRecord, MANIFEST_FILE};
pub use report::{family_files, FAMILIES as REPORT_FAMILIES, REPORT_DIR};
pub use stages::SPLITS;

use crate::{Error, Result};
use stages::Ctx;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Split,
    Train,
    Predict,
    Conductance,
    Detector,
    Mutants,
    Lcr,
    LcrThreshold,
    Unified,
    Verdict,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 11] = [
        Stage::Split,
        Stage::Train,
        Stage::Predict,
        Stage::Conductance,
        Stage::Detector,
        Stage::Mutants,
        Stage::Lcr,
        Stage::LcrThreshold,
        Stage::Unified,
        Stage::Verdict,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Predict => "predict",
            Stage::Conductance => "conductance",
            Stage::Detector => "detector",
            Stage::Mutants => "mutants",
            Stage::Lcr => "lcr",
            Stage::LcrThreshold => "lcr_threshold",
            Stage::Unified => "unified",
            Stage::Verdict => "verdict",
            Stage::Report => "report",
        }
    }

    fn run(self, ctx: &Ctx) -> Result<stages::Output> {
        match self {
            Stage::Split => stages::split(ctx),
            Stage::Train => stages::train(ctx),
            Stage::Predict => stages::predict(ctx),
            Stage::Conductance => stages::conductance(ctx),
            Stage::Detector => stages::detector(ctx),
            Stage::Mutants => stages::mutants(ctx),
            Stage::Lcr => stages::lcr(ctx),
            Stage::LcrThreshold => stages::lcr_threshold(ctx),
            Stage::Unified => stages::unified(ctx),
            Stage::Verdict => stages::verdict(ctx),
            Stage::Report => stages::report(ctx),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown stage `{s}`")))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Reuse verified stages from an existing manifest with the same config hash.
    pub resume: bool,
    /// Last stage to run.
    pub until: Stage,
    /// Refuse to compute stages before `until`; they must already be recorded.
    pub require_upstream: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            resume: false,
            until: Stage::Report,
            require_upstream: false,
        }
    }
}

/// Stages before `until` that are not recorded with intact artifacts.
pub fn missing_stages(cfg: &RunConfig, until: Stage) -> Result<Vec<Stage>> {
    let manifest = RunManifest::load(&cfg.out_dir)?.filter(|m| m.config_hash == cfg.hash());
    Ok(Stage::ALL
        .into_iter()
        .take_while(|&s| s < until)
        .filter(|s| {
            !manifest
                .as_ref()
                .is_some_and(|m| m.verified(s.name(), &cfg.out_dir))
        })
        .collect())
}

pub fn run_pipeline(cfg: &RunConfig, opts: &RunOptions) -> Result<RunManifest> {
    let dir = &cfg.out_dir;
    if opts.require_upstream {
        let missing = missing_stages(cfg, opts.until)?;
        if !missing.is_empty() {
            return Err(Error::MissingStages(
                missing.iter().map(|s| s.name().to_owned()).collect(),
            ));
        }
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let hash = cfg.hash();
    let mut manifest = match RunManifest::load(dir)? {
        Some(m) if opts.resume && m.config_hash == hash => m,
        _ => RunManifest::new(hash),
    };
    let data = cfg.load_dataset()?;
    cfg.model_spec(&data)?.validate()?;
    let ctx = Ctx {
        cfg,
        dir,
        data: &data,
    };

    let mut dirty = false;
    for stage in Stage::ALL.into_iter().take_while(|&s| s <= opts.until) {
        if !dirty && manifest.verified(stage.name(), dir) {
            log::info!("{stage}: up to date");
            continue;
        }
        dirty = true;
        manifest.invalidate_from(stage.name());
        log::info!("{stage}: running");
        let start = Instant::now();
        let output = match stage.run(&ctx) {
            Ok(o) => o,
            Err(e) => {
                manifest.failed = Some(StageFailure {
                    name: stage.name().into(),
                    error: e.to_string(),
                });
                manifest.save(dir)?;
                return Err(Error::Stage {
                    stage: stage.name().into(),
                    source: Box::new(e),
                });
            }
        };
        let artifacts = output
            .files
            .into_iter()
            .map(|path| {
                Ok(Artifact {
                    sha256: file_digest(&dir.join(&path))?,
                    path,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let seconds = start.elapsed().as_secs_f64();
        log::info!("{stage}: done in {seconds:.1}s");
        manifest.record(StageRecord {
            name: stage.name().into(),
            artifacts,
            seconds,
            metrics: output.metrics,
        });
        manifest.save(dir)?;
    }
    Ok(manifest)
}

/// Train, validation and test sets of a run whose split stage has completed.
pub fn load_splits(cfg: &RunConfig) -> Result<[crate::data::Dataset; 3]> {
    let data = cfg.load_dataset()?;
    Ctx {
        cfg,
        dir: &cfg.out_dir,
        data: &data,
    }
    .splits()
}

/// Renders the report of a completed run without recomputing anything else.
pub fn render_report(cfg: &RunConfig) -> Result<RunManifest> {
    run_pipeline(
        cfg,
        &RunOptions {
            resume: true,
            until: Stage::Report,
            require_upstream: true,
        },
    )
}
