use std::path::Path;

use serde::Serialize;

use super::{predict_mutants, MutantSet};
use crate::data::Dataset;
use crate::model::Model;
use crate::table::{self, Rows};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Label change rate of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct LcrRecord {
    pub sample_id: u64,
    pub true_class: usize,
    /// Prediction of the original model.
    pub pred_class: usize,
    pub is_wrong: bool,
    /// Mutants whose prediction differs from `pred_class`.
    pub changed: usize,
    /// Mutants used.
    pub count: usize,
}

impl LcrRecord {
    pub fn lcr(&self) -> f64 {
        self.changed as f64 / self.count as f64
    }
}

/// Label change rate of a single input: the fraction of mutants whose argmax
/// differs from the original model's.
pub fn lcr(x: &Tensor, original: &Model, mutants: &MutantSet) -> Result<f64> {
    if mutants.is_empty() {
        return Err(Error::InvalidArgument("mutant set is empty".into()));
    }
    let base = original.predict_class(x)?;
    let mut changed = 0;
    for m in &mutants.mutants {
        if m.apply(original)?.predict_class(x)? != base {
            changed += 1;
        }
    }
    Ok(changed as f64 / mutants.len() as f64)
}

/// Which mutants flip which samples, kept so that LCR can be recomputed over
/// any prefix of the mutant list.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelChanges {
    pub sample_ids: Vec<u64>,
    pub true_class: Vec<usize>,
    pub pred_class: Vec<usize>,
    /// `flips[s][m]`.
    pub flips: Vec<Vec<bool>>,
}

impl LabelChanges {
    pub fn mutant_count(&self) -> usize {
        self.flips.first().map_or(0, Vec::len)
    }

    /// Records computed from the first `m` mutants.
    pub fn records(&self, m: usize) -> Result<Vec<LcrRecord>> {
        if m == 0 || m > self.mutant_count() {
            return Err(Error::InvalidArgument(format!(
                "cannot use {m} of {} mutants",
                self.mutant_count()
            )));
        }
        Ok((0..self.sample_ids.len())
            .map(|s| LcrRecord {
                sample_id: self.sample_ids[s],
                true_class: self.true_class[s],
                pred_class: self.pred_class[s],
                is_wrong: self.pred_class[s] != self.true_class[s],
                changed: self.flips[s][..m].iter().filter(|&&f| f).count(),
                count: m,
            })
            .collect())
    }
}

pub fn label_changes(set: &Dataset, original: &Model, mutants: &MutantSet) -> Result<LabelChanges> {
    if mutants.is_empty() {
        return Err(Error::InvalidArgument("mutant set is empty".into()));
    }
    let preds = predict_mutants(original, &mutants.mutants, set)?;
    let flips = (0..set.len())
        .map(|s| {
            preds
                .mutants
                .iter()
                .map(|m| m[s] != preds.original[s])
                .collect()
        })
        .collect();
    Ok(LabelChanges {
        sample_ids: set.ids().to_vec(),
        true_class: set.labels().to_vec(),
        pred_class: preds.original,
        flips,
    })
}

/// LCR of every sample of `set`, in input order.
pub fn lcr_dataset(set: &Dataset, original: &Model, mutants: &MutantSet) -> Result<Vec<LcrRecord>> {
    label_changes(set, original, mutants)?.records(mutants.len())
}

/// Columns `sample_id,true_class,pred_class,is_wrong,lcr`.
pub fn write_lcr_csv(path: &Path, records: &[LcrRecord]) -> Result<()> {
    let header = ["sample_id", "true_class", "pred_class", "is_wrong", "lcr"].map(String::from);
    table::write_csv(
        path,
        &header,
        records.iter().map(|r| {
            [
                r.sample_id.to_string(),
                r.true_class.to_string(),
                r.pred_class.to_string(),
                table::flag(r.is_wrong),
                r.lcr().to_string(),
            ]
        }),
    )
}

/// Reads records written by [`write_lcr_csv`] for a population of `count` mutants.
pub fn read_lcr_csv(path: &Path, count: usize) -> Result<Vec<LcrRecord>> {
    let t = Rows::read(path)?;
    t.expect_header(&["sample_id", "true_class", "pred_class", "is_wrong", "lcr"])?;
    (0..t.records.len())
        .map(|i| {
            let lcr: f64 = t.parse(i, 4)?;
            let changed = (lcr * count as f64).round();
            if !(0.0..=count as f64).contains(&changed)
                || (changed - lcr * count as f64).abs() > 1e-6
            {
                return Err(Error::Csv(format!(
                    "{}: row {}: lcr {lcr} is not a multiple of 1/{count}",
                    path.display(),
                    i + 2
                )));
            }
            Ok(LcrRecord {
                sample_id: t.parse(i, 0)?,
                true_class: t.parse(i, 1)?,
                pred_class: t.parse(i, 2)?,
                is_wrong: t.parse_bool(i, 3)?,
                changed: changed as usize,
                count,
            })
        })
        .collect()
}

/// Mean and population standard deviation of one group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupStats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

impl GroupStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            n: values.len(),
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LcrSummary {
    pub correct: Option<GroupStats>,
    pub wrong: Option<GroupStats>,
    /// `(mean_wrong - std_wrong) - (mean_correct + std_correct)`; `None` when a
    /// group is empty.
    pub difference: Option<f64>,
}

pub fn lcr_summary(records: &[LcrRecord]) -> LcrSummary {
    let pick = |wrong: bool| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.is_wrong == wrong)
            .map(LcrRecord::lcr)
            .collect()
    };
    let correct = GroupStats::of(&pick(false));
    let wrong = GroupStats::of(&pick(true));
    let difference = match (correct, wrong) {
        (Some(c), Some(w)) => Some((w.mean - w.std) - (c.mean + c.std)),
        _ => None,
    };
    LcrSummary {
        correct,
        wrong,
        difference,
    }
}
