//! Binary classifiers that score how likely a prediction is wrong, plus the
//! ROC machinery used to evaluate them and pick decision thresholds.
//!
//! Every detector z-scores its inputs with statistics frozen at training time
//! and outputs a score in `[0, 1)`: higher means more likely wrong.

mod file;
mod gaussian;
mod mlp;
mod roc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use file::DETECTOR_VERSION;
pub use gaussian::COVARIANCE_RIDGE;
pub use roc::{
    auroc, auroc_pair_oracle, confusion_report, roc_curve, select_threshold, Confusion, RocCurve,
    RocPoint, ThresholdDecision, ThresholdPolicy,
};

use gaussian::{Lda, Qda};
use mlp::Mlp;

use crate::{Error, Result};

/// Largest score a detector returns, so that a threshold of 1 flags nothing.
pub const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Two hidden layers of 200 units, for conductance vectors.
    #[serde(rename = "mlp_2x200")]
    Mlp2x200,
    /// Two hidden layers of 10 units, for the unified classifier.
    #[serde(rename = "mlp_2x10")]
    Mlp2x10,
    Lda,
    Qda,
}

impl DetectorKind {
    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Mlp2x200 => "mlp_2x200",
            DetectorKind::Mlp2x10 => "mlp_2x10",
            DetectorKind::Lda => "lda",
            DetectorKind::Qda => "qda",
        }
    }

    fn hidden(self) -> Option<[usize; 2]> {
        match self {
            DetectorKind::Mlp2x200 => Some([200, 200]),
            DetectorKind::Mlp2x10 => Some([10, 10]),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without monitor AUROC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Share of the training set held out for monitoring when no separate
    /// monitor set is given.
    pub monitor_fraction: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 32,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            monitor_fraction: 0.2,
        }
    }
}

/// Per-feature z-scoring. Constant features map to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x[0].len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; d];
        for r in x {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for r in x {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Inner {
    Mlp(Mlp),
    Lda(Lda),
    Qda(Qda),
}

/// A trained detector.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    kind: DetectorKind,
    normalizer: Normalizer,
    inner: Inner,
    /// Best monitor AUROC seen while training an MLP.
    pub monitor_auroc: Option<f64>,
    /// Epochs run, zero for closed-form fits.
    pub epochs: usize,
}

/// Means and covariances of a discriminant model in input units.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianParams {
    /// `[correct, wrong]`.
    pub means: [Vec<f64>; 2],
    /// Row-major `d x d`; LDA reports the pooled covariance twice.
    pub covs: [Vec<f64>; 2],
    pub priors: [f64; 2],
}

fn check_training(x: &[Vec<f64>], y: &[bool]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "{} feature rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let d = x.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::InvalidArgument("no features".into()));
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::shape(
            "detector",
            format!("row {i} has {} features, expected {d}", x[i].len()),
        ));
    }
    if let Some(i) = x.iter().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "row {i} has a non-finite feature"
        )));
    }
    let wrong = y.iter().filter(|&&v| v).count();
    let correct = y.len() - wrong;
    if wrong < 2 || correct < 2 {
        return Err(Error::Degenerate(format!(
            "training needs at least two samples per class, got {correct} correct and {wrong} wrong"
        )));
    }
    Ok(d)
}

/// Stratified split of row positions into (fit, monitor).
fn carve_monitor(y: &[bool], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6e69);
    let (mut fit, mut mon) = (Vec::new(), Vec::new());
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = ((idx.len() as f64 * fraction).round() as usize).clamp(1, idx.len() - 1);
        mon.extend_from_slice(&idx[..k]);
        fit.extend_from_slice(&idx[k..]);
    }
    fit.sort_unstable();
    mon.sort_unstable();
    (fit, mon)
}

impl Detector {
    /// Trains a detector on rows `x` with `y[i]` true for wrong predictions.
    ///
    /// MLPs stop early on the AUROC of `monitor`; without one a stratified
    /// share of the training rows is held out for the purpose.
    pub fn fit(
        kind: DetectorKind,
        x: &[Vec<f64>],
        y: &[bool],
        monitor: Option<(&[Vec<f64>], &[bool])>,
        cfg: &DetectorConfig,
    ) -> Result<Self> {
        let d = check_training(x, y)?;
        let normalizer = Normalizer::fit(x);
        let xn: Vec<Vec<f64>> = x.iter().map(|r| normalizer.apply(r)).collect();
        let (inner, monitor_auroc, epochs) = match kind.hidden() {
            Some(hidden) => {
                let (fx, fy, mx, my) = match monitor {
                    Some((mx, my)) => {
                        check_training(mx, my)?;
                        if mx[0].len() != d {
                            return Err(Error::shape(
                                "detector",
                                "monitor rows differ in width from training rows",
                            ));
                        }
                        (
                            xn,
                            y.to_vec(),
                            mx.iter().map(|r| normalizer.apply(r)).collect(),
                            my.to_vec(),
                        )
                    }
                    None => {
                        let (fit, mon) = carve_monitor(y, cfg.monitor_fraction, cfg.seed);
                        let pick = |ix: &[usize]| -> (Vec<Vec<f64>>, Vec<bool>) {
                            (
                                ix.iter().map(|&i| xn[i].clone()).collect(),
                                ix.iter().map(|&i| y[i]).collect(),
                            )
                        };
                        let (fx, fy) = pick(&fit);
                        let (mx, my) = pick(&mon);
                        (fx, fy, mx, my)
                    }
                };
                let (net, log) = mlp::fit(&fx, &fy, (&mx, &my), &hidden, cfg)?;
                log::info!(
                    "{}: best monitor AUROC {:.4} at epoch {} of {}",
                    kind.name(),
                    log.best_auroc,
                    log.best_epoch,
                    log.epochs
                );
                (Inner::Mlp(net), Some(log.best_auroc), log.epochs)
            }
            None if kind == DetectorKind::Lda => (Inner::Lda(Lda::fit(&xn, y)?), None, 0),
            None => (Inner::Qda(Qda::fit(&xn, y)?), None, 0),
        };
        Ok(Self {
            kind,
            normalizer,
            inner,
            monitor_auroc,
            epochs,
        })
    }

    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.normalizer.dim()
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    /// Likelihood that the prediction behind `features` is wrong.
    pub fn score(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.dim() {
            return Err(Error::shape(
                "detector score",
                format!(
                    "{} features, detector expects {}",
                    features.len(),
                    self.dim()
                ),
            ));
        }
        let x = self.normalizer.apply(features);
        let s = match &self.inner {
            Inner::Mlp(net) => crate::tensor::ops::sigmoid(net.logit(&x)),
            Inner::Lda(m) => m.score(&x),
            Inner::Qda(m) => m.score(&x),
        };
        Ok(s.clamp(0.0, MAX_SCORE))
    }

    pub fn score_all(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.score(r)).collect()
    }

    /// Class means and covariances in input units, for LDA and QDA.
    pub fn gaussian_params(&self) -> Option<GaussianParams> {
        let (means, covs, priors) = match &self.inner {
            Inner::Lda(m) => (&m.means, [&m.cov, &m.cov], m.priors),
            Inner::Qda(m) => (&m.means, [&m.covs[0], &m.covs[1]], m.priors),
            Inner::Mlp(_) => return None,
        };
        let s = DVector::from_column_slice(&self.normalizer.std);
        let mu = DVector::from_column_slice(&self.normalizer.mean);
        let scale = DMatrix::from_diagonal(&s);
        let mean = |m: &DVector<f64>| (m.component_mul(&s) + &mu).as_slice().to_vec();
        let cov = |c: &DMatrix<f64>| {
            let raw = &scale * c * &scale;
            raw.transpose().as_slice().to_vec()
        };
        Some(GaussianParams {
            means: [mean(&means[0]), mean(&means[1])],
            covs: [cov(covs[0]), cov(covs[1])],
            priors,
        })
    }
}

/// Conductance-vector detector (MLP with two 200-unit hidden layers).
pub fn train_error_detector(
    features: &[Vec<f64>],
    labels: &[bool],
    monitor: Option<(&[Vec<f64>], &[bool])>,
    cfg: &DetectorConfig,
) -> Result<Detector> {
    Detector::fit(DetectorKind::Mlp2x200, features, labels, monitor, cfg)
}

/// Scores of the training rows from detectors that never saw them: rows are
/// dealt into `folds` class-stratified folds and each fold is scored by a
/// detector fit on the others. Used as second-stage training input, where
/// in-sample scores would be far more confident than on fresh data.
pub fn out_of_fold_scores(
    kind: DetectorKind,
    features: &[Vec<f64>],
    labels: &[bool],
    monitor: Option<(&[Vec<f64>], &[bool])>,
    folds: usize,
    cfg: &DetectorConfig,
) -> Result<Vec<f64>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if features.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x00F0_1D5E);
    let mut fold_of = vec![0usize; labels.len()];
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            fold_of[i] = j % folds;
        }
    }
    let mut scores = vec![0.0; labels.len()];
    for f in 0..folds {
        let (fit, held): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| fold_of[i] != f);
        let x: Vec<Vec<f64>> = fit.iter().map(|&i| features[i].clone()).collect();
        let y: Vec<bool> = fit.iter().map(|&i| labels[i]).collect();
        let det = Detector::fit(kind, &x, &y, monitor, cfg)?;
        for i in held {
            scores[i] = det.score(&features[i])?;
        }
    }
    Ok(scores)
}

/// Rows `(conductance detector score, lcr)`.
pub fn unified_features(cond_scores: &[f64], lcr: &[f64]) -> Result<Vec<Vec<f64>>> {
    if cond_scores.len() != lcr.len() {
        return Err(Error::InvalidArgument(format!(
            "{} conductance scores but {} LCR values",
            cond_scores.len(),
            lcr.len()
        )));
    }
    Ok(cond_scores
        .iter()
        .zip(lcr)
        .map(|(&c, &l)| vec![c, l])
        .collect())
}

/// Second-stage classifier over conductance-detector scores and LCR.
pub fn train_unified(
    cond_scores: &[f64],
    lcr: &[f64],
    labels: &[bool],
    kind: DetectorKind,
    monitor: Option<(&[f64], &[f64], &[bool])>,
    cfg: &DetectorConfig,
) -> Result<Detector> {
    if kind == DetectorKind::Mlp2x200 {
        return Err(Error::InvalidArgument(
            "the unified classifier is mlp_2x10, lda or qda".into(),
        ));
    }
    let x = unified_features(cond_scores, lcr)?;
    let mon = monitor
        .map(|(c, l, y)| unified_features(c, l).map(|m| (m, y)))
        .transpose()?;
    Detector::fit(
        kind,
        &x,
        labels,
        mon.as_ref().map(|(m, y)| (m.as_slice(), *y)),
        cfg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn blobs(n: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| {
                let wrong = i % 4 == 0;
                let c = if wrong { sep } else { -sep };
                (
                    vec![c + noise.sample(&mut rng), 0.5 * c + noise.sample(&mut rng)],
                    wrong,
                )
            })
            .unzip()
    }

    fn quick() -> DetectorConfig {
        DetectorConfig {
            max_epochs: 40,
            patience: 5,
            ..DetectorConfig::default()
        }
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let (x, y) = blobs(200, 10.0, 1);
        let (vx, vy) = blobs(100, 10.0, 2);
        for kind in [
            DetectorKind::Mlp2x10,
            DetectorKind::Mlp2x200,
            DetectorKind::Lda,
            DetectorKind::Qda,
        ] {
            let det = Detector::fit(kind, &x, &y, Some((&vx, &vy)), &quick()).unwrap();
            let s = det.score_all(&vx).unwrap();
            assert_eq!(auroc(&s, &vy).unwrap(), 1.0, "{}", kind.name());
        }
    }

    #[test]
    fn out_of_fold_scores_cover_every_row() {
        let (x, y) = blobs(200, 10.0, 7);
        let s = out_of_fold_scores(DetectorKind::Lda, &x, &y, None, 4, &quick()).unwrap();
        assert_eq!(s.len(), x.len());
        assert_eq!(auroc(&s, &y).unwrap(), 1.0);
        let again = out_of_fold_scores(DetectorKind::Lda, &x, &y, None, 4, &quick()).unwrap();
        assert_eq!(s, again);
        assert!(out_of_fold_scores(DetectorKind::Lda, &x, &y, None, 1, &quick()).is_err());

        // held-out scores are not the in-sample ones
        let (noisy, ny) = blobs(120, 0.5, 8);
        let oof = out_of_fold_scores(DetectorKind::Qda, &noisy, &ny, None, 3, &quick()).unwrap();
        let full = Detector::fit(DetectorKind::Qda, &noisy, &ny, None, &quick()).unwrap();
        let in_sample = full.score_all(&noisy).unwrap();
        assert_ne!(oof, in_sample);
    }

    #[test]
    fn shuffled_labels_are_chance() {
        let mut total = 0.0;
        let seeds = 6;
        for seed in 0..seeds {
            let (x, mut y) = blobs(400, 1.5, 10 + seed);
            let (vx, mut vy) = blobs(400, 1.5, 100 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            y.shuffle(&mut rng);
            vy.shuffle(&mut rng);
            let cfg = DetectorConfig { seed, ..quick() };
            let det = Detector::fit(DetectorKind::Mlp2x10, &x, &y, None, &cfg).unwrap();
            total += auroc(&det.score_all(&vx).unwrap(), &vy).unwrap();
        }
        let mean = total / seeds as f64;
        assert!((0.45..=0.55).contains(&mean), "{mean}");
    }

    #[test]
    fn scores_bounded_and_deterministic() {
        let (x, y) = blobs(120, 1.0, 3);
        let det = Detector::fit(DetectorKind::Mlp2x10, &x, &y, None, &quick()).unwrap();
        let again = Detector::fit(DetectorKind::Mlp2x10, &x, &y, None, &quick()).unwrap();
        assert_eq!(det, again);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let v = vec![rng.random_range(-1e3..1e3), rng.random_range(-1e3..1e3)];
            let s = det.score(&v).unwrap();
            assert!((0.0..1.0).contains(&s));
            assert_eq!(s, det.score(&v).unwrap());
        }
        assert!(det.score(&[1.0]).is_err());
    }

    #[test]
    fn rejects_degenerate_labels() {
        let (x, _) = blobs(20, 1.0, 4);
        let y = vec![false; 20];
        assert!(matches!(
            Detector::fit(DetectorKind::Lda, &x, &y, None, &quick()),
            Err(Error::Degenerate(_))
        ));
        assert!(train_unified(
            &[0.1, 0.2],
            &[0.3],
            &[true, false],
            DetectorKind::Lda,
            None,
            &quick()
        )
        .is_err());
    }

    #[test]
    fn lda_midpoint_is_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let (x, y): (Vec<Vec<f64>>, Vec<bool>) = (0..2000)
            .map(|i| {
                let wrong = i % 2 == 0;
                let c = if wrong { 1.0 } else { -1.0 };
                (
                    vec![
                        c + noise.sample(&mut rng),
                        -c + 2.0 * noise.sample(&mut rng),
                    ],
                    wrong,
                )
            })
            .unzip();
        let det = Detector::fit(DetectorKind::Lda, &x, &y, None, &quick()).unwrap();
        let g = det.gaussian_params().unwrap();
        let mid: Vec<f64> = (0..2)
            .map(|i| (g.means[0][i] + g.means[1][i]) / 2.0)
            .collect();
        assert!((det.score(&mid).unwrap() - 0.5).abs() < 1e-9);
    }

    fn draw(n: usize, mean: [f64; 2], chol: [[f64; 2]; 2], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let z = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                let (a, b) = (z.sample(rng), z.sample(rng));
                vec![
                    mean[0] + chol[0][0] * a,
                    mean[1] + chol[1][0] * a + chol[1][1] * b,
                ]
            })
            .collect()
    }

    #[test]
    fn discriminants_recover_generating_gaussians() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // covariances L L^T: [[4, 2], [2, 2]] and [[1, -0.5], [-0.5, 1.25]]
        let l0 = [[2.0, 0.0], [1.0, 1.0]];
        let l1 = [[1.0, 0.0], [-0.5, 1.0]];
        let cov0 = [4.0, 2.0, 2.0, 2.0];
        let cov1 = [1.0, -0.5, -0.5, 1.25];
        let (m0, m1) = ([3.0, -2.0], [-1.0, 4.0]);
        let mut x = draw(10_000, m0, l0, &mut rng);
        x.extend(draw(10_000, m1, l1, &mut rng));
        let y: Vec<bool> = (0..20_000).map(|i| i >= 10_000).collect();

        let close = |got: f64, want: f64, scale: f64| (got - want).abs() <= 0.05 * scale;
        let q = Detector::fit(DetectorKind::Qda, &x, &y, None, &quick())
            .unwrap()
            .gaussian_params()
            .unwrap();
        for i in 0..2 {
            assert!(close(q.means[0][i], m0[i], 4.0), "{:?}", q.means);
            assert!(close(q.means[1][i], m1[i], 4.0), "{:?}", q.means);
        }
        for k in 0..4 {
            assert!(close(q.covs[0][k], cov0[k], 4.0), "{:?}", q.covs[0]);
            assert!(close(q.covs[1][k], cov1[k], 1.25), "{:?}", q.covs[1]);
        }
        assert_eq!(q.priors, [0.5, 0.5]);

        let l = Detector::fit(DetectorKind::Lda, &x, &y, None, &quick())
            .unwrap()
            .gaussian_params()
            .unwrap();
        for k in 0..4 {
            let pooled = (cov0[k] + cov1[k]) / 2.0;
            assert!(close(l.covs[0][k], pooled, 2.6), "{:?}", l.covs[0]);
        }
    }

    #[test]
    fn constant_lcr_adds_nothing() {
        let (x, y) = blobs(600, 0.6, 8);
        let (vx, vy) = blobs(600, 0.6, 9);
        let cond: Vec<f64> = x.iter().map(|r| r[0]).collect();
        let vcond: Vec<f64> = vx.iter().map(|r| r[0]).collect();
        let zeros = vec![0.25; cond.len()];
        let base = auroc(&vcond, &vy).unwrap();
        for kind in [DetectorKind::Mlp2x10, DetectorKind::Lda, DetectorKind::Qda] {
            let det = train_unified(
                &cond,
                &zeros,
                &y,
                kind,
                Some((&vcond, &zeros, &vy)),
                &quick(),
            )
            .unwrap();
            let rows = unified_features(&vcond, &zeros).unwrap();
            let a = auroc(&det.score_all(&rows).unwrap(), &vy).unwrap();
            assert!((a - base).abs() <= 0.01, "{}: {a} vs {base}", kind.name());
        }
    }

    #[test]
    fn monitor_split_is_stratified() {
        let y: Vec<bool> = (0..100).map(|i| i % 5 == 0).collect();
        let (fit, mon) = carve_monitor(&y, 0.2, 1);
        assert_eq!(fit.len() + mon.len(), 100);
        assert_eq!(mon.iter().filter(|&&i| y[i]).count(), 4);
        assert_eq!(mon.len(), 20);
    }
}
