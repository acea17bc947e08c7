//! ROC curves over "prediction is wrong" scores, AUROC, and threshold choice.
//!
//! A sample is flagged wrong when `score >= threshold`. Recall of the wrong
//! class is the fraction of wrong predictions flagged; recall of the correct
//! class is the fraction of correct predictions left unflagged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::table::{self, Rows};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub recall_correct: f64,
    pub recall_wrong: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Strictly decreasing thresholds, starting at `+inf` (nothing flagged)
    /// and ending at the lowest score (everything flagged).
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

fn class_counts(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {i} is NaN")));
    }
    let wrong = labels.iter().filter(|&&l| l).count();
    let correct = labels.len() - wrong;
    if wrong == 0 || correct == 0 {
        return Err(Error::Degenerate(format!(
            "ROC needs both classes, got {correct} correct and {wrong} wrong"
        )));
    }
    Ok((correct, wrong))
}

/// `labels[i]` is true when sample `i` is a wrong prediction.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (n_correct, n_wrong) = class_counts(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        recall_correct: 1.0,
        recall_wrong: 0.0,
    }];
    // twice the area in units of (correct x wrong) sample pairs, kept integral
    let mut area2: u128 = 0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            threshold: s,
            recall_correct: (n_correct - fp) as f64 / n_correct as f64,
            recall_wrong: tp as f64 / n_wrong as f64,
        });
    }
    let auroc = area2 as f64 / (2 * n_correct * n_wrong) as f64;
    Ok(RocCurve { points, auroc })
}

pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    Ok(roc_curve(scores, labels)?.auroc)
}

/// Fraction of (wrong, correct) pairs where the wrong one scores higher, with
/// ties counted as half. Quadratic; used to check [`roc_curve`].
pub fn auroc_pair_oracle(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (n_correct, n_wrong) = class_counts(scores, labels)?;
    let mut twice: u128 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            if si > sj {
                twice += 2;
            } else if si == sj {
                twice += 1;
            }
        }
    }
    Ok(twice as f64 / (2 * n_correct * n_wrong) as f64)
}

impl RocCurve {
    /// Columns `threshold,recall_correct,recall_wrong`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = ["threshold", "recall_correct", "recall_wrong"].map(String::from);
        table::write_csv(
            path,
            &header,
            self.points.iter().map(|p| {
                [
                    p.threshold.to_string(),
                    p.recall_correct.to_string(),
                    p.recall_wrong.to_string(),
                ]
            }),
        )
    }

    /// Reads a curve back, recomputing AUROC from the points.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = Rows::read(path)?;
        t.expect_header(&["threshold", "recall_correct", "recall_wrong"])?;
        let points: Vec<RocPoint> = (0..t.records.len())
            .map(|i| {
                Ok(RocPoint {
                    threshold: t.parse(i, 0)?,
                    recall_correct: t.parse(i, 1)?,
                    recall_wrong: t.parse(i, 2)?,
                })
            })
            .collect::<Result<_>>()?;
        if points.is_empty() {
            return Err(Error::Csv(format!("{}: empty ROC curve", path.display())));
        }
        let auroc = points
            .windows(2)
            .map(|w| {
                let dx = w[0].recall_correct - w[1].recall_correct;
                dx * (w[0].recall_wrong + w[1].recall_wrong) / 2.0
            })
            .sum();
        Ok(Self { points, auroc })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Minimize `|recall_correct - recall_wrong|`.
    EqualRecall,
    /// Best wrong-recall among thresholds keeping correct-recall at `target`.
    FavorCorrect {
        #[serde(default = "default_target")]
        target: f64,
    },
    /// Best correct-recall among thresholds keeping wrong-recall at `target`.
    FavorWrong {
        #[serde(default = "default_target")]
        target: f64,
    },
}

fn default_target() -> f64 {
    0.98
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::EqualRecall
    }
}

impl ThresholdPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            ThresholdPolicy::EqualRecall => "equal_recall",
            ThresholdPolicy::FavorCorrect { .. } => "favor_correct",
            ThresholdPolicy::FavorWrong { .. } => "favor_wrong",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdDecision {
    pub threshold: f64,
    pub policy: ThresholdPolicy,
    pub recall_correct: f64,
    pub recall_wrong: f64,
    /// False when the policy's target recall could not be met and the nearest
    /// point was taken instead.
    pub attained: bool,
}

pub fn select_threshold(roc: &RocCurve, policy: ThresholdPolicy) -> Result<ThresholdDecision> {
    if roc.points.is_empty() {
        return Err(Error::InvalidArgument("empty ROC curve".into()));
    }
    let pts = &roc.points;
    // first index maximizing `key`; `total_cmp` keeps the order deterministic
    let best_by = |key: &dyn Fn(&RocPoint) -> (f64, f64),
                   filter: &dyn Fn(&RocPoint) -> bool|
     -> Option<usize> {
        let mut best: Option<(usize, (f64, f64))> = None;
        for (i, p) in pts.iter().enumerate().filter(|(_, p)| filter(p)) {
            let k = key(p);
            let better = match best {
                None => true,
                Some((_, b)) => k.0.total_cmp(&b.0).then(k.1.total_cmp(&b.1)).is_gt(),
            };
            if better {
                best = Some((i, k));
            }
        }
        best.map(|b| b.0)
    };

    let (index, attained) = match policy {
        ThresholdPolicy::EqualRecall => (
            best_by(
                &|p| {
                    (
                        -(p.recall_correct - p.recall_wrong).abs(),
                        p.recall_correct + p.recall_wrong,
                    )
                },
                &|_| true,
            )
            .expect("nonempty"),
            true,
        ),
        ThresholdPolicy::FavorCorrect { target } => {
            match best_by(&|p| (p.recall_wrong, p.recall_correct), &|p| {
                p.recall_correct >= target
            }) {
                Some(i) => (i, true),
                None => (
                    best_by(&|p| (p.recall_correct, p.recall_wrong), &|_| true).expect("nonempty"),
                    false,
                ),
            }
        }
        ThresholdPolicy::FavorWrong { target } => {
            match best_by(&|p| (p.recall_correct, p.recall_wrong), &|p| {
                p.recall_wrong >= target
            }) {
                Some(i) => (i, true),
                None => (
                    best_by(&|p| (p.recall_wrong, p.recall_correct), &|_| true).expect("nonempty"),
                    false,
                ),
            }
        }
    };
    let p = pts[index];
    if !attained {
        log::warn!(
            "{} target not reachable; using nearest point",
            policy.name()
        );
    }
    Ok(ThresholdDecision {
        threshold: p.threshold,
        policy,
        recall_correct: p.recall_correct,
        recall_wrong: p.recall_wrong,
        attained,
    })
}

/// Outcome counts of flagging with one threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Confusion {
    pub threshold: f64,
    /// Wrong predictions flagged.
    pub caught: usize,
    /// Wrong predictions not flagged.
    pub missed: usize,
    /// Correct predictions flagged.
    pub false_alarms: usize,
    /// Correct predictions not flagged.
    pub passed: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.caught + self.missed + self.false_alarms + self.passed
    }

    pub fn recall_wrong(&self) -> Option<f64> {
        let n = self.caught + self.missed;
        (n > 0).then(|| self.caught as f64 / n as f64)
    }

    pub fn recall_correct(&self) -> Option<f64> {
        let n = self.passed + self.false_alarms;
        (n > 0).then(|| self.passed as f64 / n as f64)
    }
}

pub fn confusion_report(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if threshold.is_nan() {
        return Err(Error::InvalidArgument("threshold is NaN".into()));
    }
    let mut c = Confusion {
        threshold,
        caught: 0,
        missed: 0,
        false_alarms: 0,
        passed: 0,
    };
    for (&s, &wrong) in scores.iter().zip(labels) {
        match (s >= threshold, wrong) {
            (true, true) => c.caught += 1,
            (false, true) => c.missed += 1,
            (true, false) => c.false_alarms += 1,
            (false, false) => c.passed += 1,
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_case() {
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
        assert_eq!(auroc_pair_oracle(&s, &l).unwrap(), 0.75);
    }

    #[test]
    fn extremes() {
        let l = [false, true, false, true];
        assert_eq!(auroc(&[0.1, 0.9, 0.2, 0.8], &l).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5; 4], &l).unwrap(), 0.5);
        let c = roc_curve(&[0.5; 4], &l).unwrap();
        assert_eq!(c.points.len(), 2);
        assert!(roc_curve(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_curve(&[0.1], &[true, false]).is_err());
        assert!(roc_curve(&[f64::NAN, 0.2], &[true, false]).is_err());
    }

    #[test]
    fn endpoints() {
        let c = roc_curve(&[0.3, 0.7, 0.7, 0.1], &[false, true, false, true]).unwrap();
        let first = c.points[0];
        let last = *c.points.last().unwrap();
        assert_eq!((first.recall_correct, first.recall_wrong), (1.0, 0.0));
        assert_eq!((last.recall_correct, last.recall_wrong), (0.0, 1.0));
        assert_eq!(last.threshold, 0.1);
    }

    #[test]
    fn symmetric_scores_give_equal_recalls() {
        // wrong scores mirror correct scores around 0.5
        let correct: Vec<f64> = (0..200)
            .map(|i| 0.05 + 0.5 * ((i as f64 + 0.5) / 200.0))
            .collect();
        let wrong: Vec<f64> = correct.iter().map(|s| 1.0 - s).collect();
        let scores: Vec<f64> = correct.iter().chain(&wrong).copied().collect();
        let labels: Vec<bool> = (0..400).map(|i| i >= 200).collect();
        let d = select_threshold(
            &roc_curve(&scores, &labels).unwrap(),
            ThresholdPolicy::EqualRecall,
        )
        .unwrap();
        assert!((d.recall_correct - d.recall_wrong).abs() < 1e-3);
    }

    #[test]
    fn favor_policies() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let labels: Vec<bool> = (0..100).map(|i| (i * 37) % 100 >= 60).collect();
        let roc = roc_curve(&scores, &labels).unwrap();
        let fc = select_threshold(&roc, ThresholdPolicy::FavorCorrect { target: 0.9 }).unwrap();
        assert!(fc.attained && fc.recall_correct >= 0.9);
        for p in &roc.points {
            if p.recall_correct >= 0.9 {
                assert!(p.recall_wrong <= fc.recall_wrong);
            }
        }
        let fw = select_threshold(&roc, ThresholdPolicy::FavorWrong { target: 0.9 }).unwrap();
        assert!(fw.attained && fw.recall_wrong >= 0.9);
        for p in &roc.points {
            if p.recall_wrong >= 0.9 {
                assert!(p.recall_correct <= fw.recall_correct);
            }
        }
        // targets above 1 cannot be met
        let miss = select_threshold(&roc, ThresholdPolicy::FavorCorrect { target: 1.5 }).unwrap();
        assert!(!miss.attained);
        assert_eq!(miss.recall_correct, 1.0);
    }

    #[test]
    fn confusion_counts() {
        let s = [0.2, 0.9, 0.6, 0.4, 0.999];
        let l = [false, true, true, false, false];
        let all = confusion_report(&s, &l, 0.0).unwrap();
        assert_eq!(
            (all.recall_wrong(), all.recall_correct()),
            (Some(1.0), Some(0.0))
        );
        let none = confusion_report(&s, &l, 1.0).unwrap();
        assert_eq!(none.caught + none.false_alarms, 0);
        let mid = confusion_report(&s, &l, 0.5).unwrap();
        assert_eq!(
            (mid.caught, mid.missed, mid.false_alarms, mid.passed),
            (2, 0, 1, 2)
        );
        assert_eq!(mid.total(), 5);
    }

    #[test]
    fn csv_round_trip() {
        let roc = roc_curve(
            &[0.3, 0.7, 0.7, 0.1, 0.2],
            &[false, true, false, true, false],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("roc.csv");
        roc.write_csv(&p).unwrap();
        let back = RocCurve::read_csv(&p).unwrap();
        assert_eq!(back.points, roc.points);
        assert!((back.auroc - roc.auroc).abs() < 1e-12);
    }

    fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..60)
            .prop_flat_map(|n| {
                // a coarse grid forces plenty of ties
                (
                    prop::collection::vec(0u8..12, n),
                    prop::collection::vec(any::<bool>(), n),
                )
            })
            .prop_map(|(s, mut l)| {
                l[0] = true;
                l[1] = false;
                (s.into_iter().map(|v| v as f64 / 11.0).collect(), l)
            })
    }

    proptest! {
        #[test]
        fn trapezoid_matches_pair_count((s, l) in scored()) {
            let a = auroc(&s, &l).unwrap();
            let b = auroc_pair_oracle(&s, &l).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn rank_invariant((s, l) in scored()) {
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert!((auroc(&s, &l).unwrap() - auroc(&t, &l).unwrap()).abs() <= 1e-12);
        }

        #[test]
        fn reversal_complements((s, l) in scored()) {
            let r: Vec<f64> = s.iter().map(|v| -v).collect();
            prop_assert!((auroc(&s, &l).unwrap() + auroc(&r, &l).unwrap() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn monotone_curve((s, l) in scored()) {
            let c = roc_curve(&s, &l).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].threshold > w[1].threshold);
                prop_assert!(w[0].recall_wrong <= w[1].recall_wrong);
                prop_assert!(w[0].recall_correct >= w[1].recall_correct);
            }
        }

        #[test]
        fn equal_recall_is_optimal((s, l) in scored()) {
            let c = roc_curve(&s, &l).unwrap();
            let d = select_threshold(&c, ThresholdPolicy::EqualRecall).unwrap();
            let gap = (d.recall_correct - d.recall_wrong).abs();
            prop_assert!(c.points.iter().any(|p| p.threshold == d.threshold));
            for p in &c.points {
                prop_assert!((p.recall_correct - p.recall_wrong).abs() >= gap);
            }
        }

        #[test]
        fn confusion_consistent((s, l) in scored(), t in 0.0f64..1.0) {
            let c = confusion_report(&s, &l, t).unwrap();
            prop_assert_eq!(c.total(), s.len());
            let flagged_wrong = s.iter().zip(&l).filter(|(v, w)| **w && **v >= t).count();
            prop_assert_eq!(c.caught, flagged_wrong);
        }
    }
}
