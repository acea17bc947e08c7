//! `manifest.json`: which stages ran, what they wrote, and what they measured.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub artifacts: Vec<Artifact>,
    pub seconds: f64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub name: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub config_hash: String,
    /// Completed stages in execution order.
    pub stages: Vec<StageRecord>,
    #[serde(default)]
    pub failed: Option<StageFailure>,
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            schema_version: super::SCHEMA_VERSION,
            config_hash,
            stages: Vec::new(),
            failed: None,
        }
    }

    /// `None` when the directory holds no manifest.
    pub fn load(out_dir: &Path) -> Result<Option<Self>> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Format {
                what: "manifest",
                offset: 0,
                reason: format!("{}: {e}", path.display()),
            })
    }

    /// Written to a temporary file first so a crash never leaves half a manifest.
    pub fn save(&self, out_dir: &Path) -> Result<()> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join(MANIFEST_FILE);
        let tmp = out_dir.join(format!("{MANIFEST_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&tmp, text + "\n").map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn metric(&self, stage: &str, key: &str) -> Option<f64> {
        self.stage(stage)?.metrics.get(key).copied()
    }

    /// Replaces the record of `record.name` and drops everything after it.
    pub fn record(&mut self, record: StageRecord) {
        if let Some(i) = self.stages.iter().position(|s| s.name == record.name) {
            self.stages.truncate(i);
        }
        self.stages.push(record);
        self.failed = None;
    }

    /// Drops the record of `name` and every later stage.
    pub fn invalidate_from(&mut self, name: &str) {
        if let Some(i) = self.stages.iter().position(|s| s.name == name) {
            self.stages.truncate(i);
        }
    }

    /// True when the stage is recorded and every artifact still matches its digest.
    pub fn verified(&self, name: &str, out_dir: &Path) -> bool {
        self.stage(name).is_some_and(|s| {
            s.artifacts
                .iter()
                .all(|a| file_digest(&out_dir.join(&a.path)).is_ok_and(|d| d == a.sha256))
        })
    }

    /// The manifest without timings, for comparing runs.
    pub fn fingerprint(&self) -> String {
        let mut m = self.clone();
        for s in &mut m.stages {
            s.seconds = 0.0;
        }
        serde_json::to_string(&m).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(name: &str, dir: &Path, content: &str) -> StageRecord {
        let file = format!("{name}.txt");
        std::fs::write(dir.join(&file), content).unwrap();
        StageRecord {
            name: name.into(),
            artifacts: vec![Artifact {
                sha256: file_digest(&dir.join(&file)).unwrap(),
                path: file,
            }],
            seconds: 1.5,
            metrics: BTreeMap::from([("x".to_string(), 1.0)]),
        }
    }

    #[test]
    fn record_verify_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("abc".into());
        for n in ["a", "b", "c"] {
            m.record(rec(n, dir.path(), n));
        }
        assert!(m.verified("b", dir.path()));
        std::fs::write(dir.path().join("b.txt"), "changed").unwrap();
        assert!(!m.verified("b", dir.path()));
        assert!(!m.verified("zzz", dir.path()));

        m.record(rec("b", dir.path(), "again"));
        let names: Vec<_> = m.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["a", "b"]);

        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), Some(m.clone()));
        let mut slower = m.clone();
        slower.stages[0].seconds = 99.0;
        assert_eq!(slower.fingerprint(), m.fingerprint());
        assert_eq!(m.metric("a", "x"), Some(1.0));
    }

    #[test]
    fn absent_and_corrupt_manifests() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), None);
        std::fs::write(dir.path().join(MANIFEST_FILE), "{").unwrap();
        assert!(matches!(
            RunManifest::load(dir.path()),
            Err(Error::Format { .. })
        ));
    }
}
