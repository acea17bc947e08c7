//! The stage bodies. Each stage reads what it needs from files written by
//! earlier stages, so any prefix of a run can be reused.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::report;
use super::scores::ScoreTable;
use super::RunConfig;
use crate::attribution::{conductance_dataset, ConductanceMatrix};
use crate::data::{self, Dataset};
use crate::detector::{
    self, confusion_report, roc_curve, select_threshold, DetectorKind, ThresholdDecision,
};
use crate::model::{self, Checkpoint, Model, PredictionRecord};
use crate::mutation::{self, label_changes, lcr_summary, read_lcr_csv, write_lcr_csv, MutantSet};
use crate::table::{self, Rows};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const SPLITS: [&str; 3] = ["train", "val", "test"];

/// Files and numbers a stage produced.
#[derive(Default)]
pub struct Output {
    pub files: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

impl Output {
    pub fn file(&mut self, rel: impl Into<String>) {
        self.files.push(rel.into());
    }

    pub fn metric(&mut self, key: impl Into<String>, v: f64) {
        self.metrics.insert(key.into(), v);
    }

    fn decision(&mut self, prefix: &str, d: &ThresholdDecision) {
        self.metric(format!("{prefix}threshold"), d.threshold);
        self.metric(format!("{prefix}val_recall_correct"), d.recall_correct);
        self.metric(format!("{prefix}val_recall_wrong"), d.recall_wrong);
        self.metric(format!("{prefix}attained"), d.attained as u8 as f64);
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub dir: &'a Path,
    pub data: &'a Dataset,
}

impl Ctx<'_> {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Train, validation and test parts as recorded by the split stage.
    pub fn splits(&self) -> Result<[Dataset; 3]> {
        let t = Rows::read(&self.path("split.csv"))?;
        t.expect_header(&["sample_id", "split"])?;
        let mut ids: [Vec<u64>; 3] = Default::default();
        for i in 0..t.records.len() {
            let name: String = t.parse(i, 1)?;
            let k = SPLITS.iter().position(|s| *s == name).ok_or_else(|| {
                Error::Csv(format!("split.csv line {}: unknown split `{name}`", i + 2))
            })?;
            ids[k].push(t.parse(i, 0)?);
        }
        Ok([
            self.data.select_ids(&ids[0])?,
            self.data.select_ids(&ids[1])?,
            self.data.select_ids(&ids[2])?,
        ])
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Checkpoint::load(self.path("model.ckpt"))?.model)
    }

    pub fn layer(&self, model: &Model) -> String {
        self.cfg
            .attribution
            .layer
            .clone()
            .unwrap_or_else(|| model.spec().last_conv_layer())
    }

    pub fn conductance(&self, split: &str) -> Result<ConductanceMatrix> {
        ConductanceMatrix::read_csv(self.path(&format!("conductance_{split}.csv")), "")
    }

    pub fn scores(&self, rel: &str) -> Result<ScoreTable> {
        ScoreTable::read(&self.path(rel))
    }
}

pub fn split(ctx: &Ctx) -> Result<Output> {
    let s = data::split(
        ctx.data,
        ctx.cfg.data.split,
        ctx.cfg.seeds().split,
        ctx.cfg.data.strict_classes,
    )?;
    let parts = [&s.train, &s.val, &s.test];
    table::write_csv(
        &ctx.path("split.csv"),
        &["sample_id", "split", "label"].map(String::from),
        parts.iter().zip(SPLITS).flat_map(|(part, name)| {
            part.iter()
                .map(move |(_, y, id)| vec![id.to_string(), name.to_string(), y.to_string()])
        }),
    )?;
    let mut out = Output::default();
    out.file("split.csv");
    for (part, name) in parts.iter().zip(SPLITS) {
        out.metric(format!("size_{name}"), part.len() as f64);
    }
    out.metric("missing_classes", s.missing.len() as f64);
    Ok(out)
}

pub fn train(ctx: &Ctx) -> Result<Output> {
    let [train, val, test] = ctx.splits()?;
    let spec = ctx.cfg.model_spec(ctx.data)?;
    let ckpt = model::train(&spec, &train, &ctx.cfg.train_config())?;
    ckpt.save(ctx.path("model.ckpt"))?;
    let mut out = Output::default();
    out.file("model.ckpt");
    for (set, name) in [&train, &val, &test].into_iter().zip(SPLITS) {
        out.metric(
            format!("accuracy_{name}"),
            model::evaluate(&ckpt.model, set)?,
        );
    }
    out.metric("epochs", ckpt.meta.epochs as f64);
    Ok(out)
}

pub fn predictions(model: &Model, set: &Dataset) -> Result<Vec<PredictionRecord>> {
    (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (x, y, id) = set.get(i);
            model::predict(model, x, y, id).map_err(|e| e.for_sample(id))
        })
        .collect()
}

pub fn predict(ctx: &Ctx) -> Result<Output> {
    let model = ctx.model()?;
    let mut out = Output::default();
    for (set, name) in ctx.splits()?.iter().zip(SPLITS) {
        let recs = predictions(&model, set)?;
        let rel = format!("predictions_{name}.csv");
        table::write_csv(
            &ctx.path(&rel),
            &[
                "sample_id",
                "true_class",
                "pred_class",
                "is_wrong",
                "softmax_score",
                "presoftmax_score",
            ]
            .map(String::from),
            recs.iter().map(|r| {
                vec![
                    r.sample_id.to_string(),
                    r.true_class.to_string(),
                    r.predicted_class.to_string(),
                    table::flag(r.is_wrong),
                    r.softmax_score.to_string(),
                    r.score().to_string(),
                ]
            }),
        )?;
        out.file(rel);
        let wrong = recs.iter().filter(|r| r.is_wrong).count();
        out.metric(format!("wrong_{name}"), wrong as f64);
        out.metric(
            format!("accuracy_{name}"),
            1.0 - wrong as f64 / recs.len().max(1) as f64,
        );
    }
    Ok(out)
}

/// Softmax confidence of every prediction in a predictions file.
pub fn read_softmax(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let t = Rows::read(path)?;
    t.expect_header(&[
        "sample_id",
        "true_class",
        "pred_class",
        "is_wrong",
        "softmax_score",
    ])?;
    (0..t.records.len())
        .map(|i| Ok((t.parse::<f64>(i, 4)?, t.parse_bool(i, 3)?)))
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().unzip())
}

pub fn conductance(ctx: &Ctx) -> Result<Output> {
    let model = ctx.model()?;
    let layer = ctx.layer(&model);
    let a = &ctx.cfg.attribution;
    let baseline = (a.baseline != 0.0).then(|| Tensor::full(&model.spec().input_shape, a.baseline));
    let mut out = Output::default();
    for (set, name) in ctx.splits()?.iter().zip(SPLITS) {
        let m = conductance_dataset(&model, set, &layer, a.steps, baseline.as_ref())?;
        let rel = format!("conductance_{name}.csv");
        m.write_csv(ctx.path(&rel))?;
        out.file(rel);
        out.metric("feature_maps", m.width() as f64);
    }
    Ok(out)
}

/// Out-of-fold conductance-detector scores of the training split.
const OOF_SCORES: &str = "cond_scores_train_oof.csv";

pub fn detector(ctx: &Ctx) -> Result<Output> {
    let mats = SPLITS.map(|s| ctx.conductance(s));
    let [train, val, test] = mats;
    let (train, val, test) = (train?, val?, test?);
    let det = detector::train_error_detector(
        &train.features(),
        &train.labels(),
        Some((&val.features(), &val.labels())),
        &ctx.cfg.detector_config(),
    )?;
    det.save(ctx.path("detector.bin"))?;
    let mut out = Output::default();
    out.file("detector.bin");
    out.metric("epochs", det.epochs as f64);
    for (m, name) in [&train, &val, &test].into_iter().zip(SPLITS) {
        let scores = det.score_all(&m.features())?;
        let labels = m.labels();
        let table = ScoreTable::new(m.rows.iter().map(|r| r.sample_id).collect(), labels.clone())
            .with("score", scores);
        let rel = format!("cond_scores_{name}.csv");
        table.write(&ctx.path(&rel))?;
        out.file(rel);
        if let Ok(a) = detector::auroc(table.column("score")?, &labels) {
            out.metric(format!("auroc_{name}"), a);
        }
    }
    // honest training-split scores for the unified classifier
    let oof = detector::out_of_fold_scores(
        DetectorKind::Mlp2x200,
        &train.features(),
        &train.labels(),
        Some((&val.features(), &val.labels())),
        ctx.cfg.unified.folds,
        &ctx.cfg.detector_config(),
    )?;
    let table = ScoreTable::new(
        train.rows.iter().map(|r| r.sample_id).collect(),
        train.labels(),
    )
    .with("score", oof);
    table.write(&ctx.path(OOF_SCORES))?;
    out.file(OOF_SCORES);
    out.metric(
        "auroc_train_oof",
        detector::auroc(table.column("score")?, &table.is_wrong)?,
    );

    let roc = roc_curve(&det.score_all(&val.features())?, &val.labels())?;
    roc.write_csv(&ctx.path("roc_conductance_val.csv"))?;
    out.file("roc_conductance_val.csv");
    out.decision("", &select_threshold(&roc, ctx.cfg.threshold)?);

    // reference point: one minus softmax confidence
    let (soft, wrong) = read_softmax(&ctx.path("predictions_val.csv"))?;
    let inv: Vec<f64> = soft.iter().map(|s| 1.0 - s).collect();
    out.metric("softmax_auroc_val", detector::auroc(&inv, &wrong)?);
    Ok(out)
}

pub fn mutants(ctx: &Ctx) -> Result<Output> {
    let model = ctx.model()?;
    let [_, val, _] = ctx.splits()?;
    let cfg = ctx.cfg;
    let base = cfg.mutation_config(cfg.mutation.rates[0]);
    let sweep = mutation::sweep_rates(&model, &base, &cfg.mutation.rates, &val)?;
    let mut set = sweep.population.clone();
    set.checkpoint = "model.ckpt".into();
    set.save(ctx.path("mutants.bin"))?;

    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    table::write_csv(
        &ctx.path("lcr_grid.csv"),
        &[
            "rate",
            "kernels",
            "yield",
            "mean_correct",
            "std_correct",
            "mean_wrong",
            "std_wrong",
            "lcr_difference",
            "chosen",
            "failure",
        ]
        .map(String::from),
        sweep.rows.iter().enumerate().map(|(i, r)| {
            let s = r.summary;
            vec![
                r.rate.to_string(),
                r.kernels.to_string(),
                r.yield_rate.to_string(),
                opt(s.and_then(|s| s.correct).map(|g| g.mean)),
                opt(s.and_then(|s| s.correct).map(|g| g.std)),
                opt(s.and_then(|s| s.wrong).map(|g| g.mean)),
                opt(s.and_then(|s| s.wrong).map(|g| g.std)),
                opt(s.and_then(|s| s.difference)),
                table::flag(i == sweep.chosen),
                r.failure.clone().unwrap_or_default(),
            ]
        }),
    )?;
    let mut out = Output::default();
    out.file("mutants.bin");
    out.file("lcr_grid.csv");
    let chosen = &sweep.rows[sweep.chosen];
    out.metric("rate", chosen.rate);
    out.metric("kernels", chosen.kernels as f64);
    out.metric("attempts", set.attempts as f64);
    out.metric("yield", set.yield_rate());
    out.metric("original_val_accuracy", set.original_accuracy);
    let floor = cfg.mutation.validity_floor * set.original_accuracy;
    let accs: Vec<f64> = set.mutants.iter().filter_map(|m| m.val_accuracy).collect();
    out.metric(
        "min_mutant_val_accuracy",
        accs.iter().copied().fold(f64::INFINITY, f64::min),
    );
    out.metric(
        "valid_fraction",
        accs.iter().filter(|&&a| a >= floor).count() as f64 / set.len() as f64,
    );
    if let Some(d) = chosen.summary.and_then(|s| s.difference) {
        out.metric("lcr_difference", d);
    }
    Ok(out)
}

/// Mutant counts at which the validation AUROC of LCR is tabulated.
fn count_grid(cfg: &RunConfig) -> Vec<usize> {
    let n = cfg.mutation.count;
    let step = (n / 10).max(1);
    let mut v: Vec<usize> = (1..=n).filter(|m| *m == 1 || m % step == 0).collect();
    v.extend(&cfg.mutation.saturation_counts);
    v.push(n);
    v.sort_unstable();
    v.dedup();
    v
}

pub fn lcr(ctx: &Ctx) -> Result<Output> {
    let model = ctx.model()?;
    let set = MutantSet::load(ctx.path("mutants.bin"))?;
    let mut out = Output::default();
    let mut val_changes = None;
    for (part, name) in ctx.splits()?.iter().zip(SPLITS) {
        let changes = label_changes(part, &model, &set)?;
        let recs = changes.records(set.len())?;
        let rel = format!("lcr_{name}.csv");
        write_lcr_csv(&ctx.path(&rel), &recs)?;
        out.file(rel);
        let s = lcr_summary(&recs);
        if let (Some(c), Some(w)) = (s.correct, s.wrong) {
            out.metric(format!("mean_correct_{name}"), c.mean);
            out.metric(format!("mean_wrong_{name}"), w.mean);
        }
        if name == "val" {
            val_changes = Some(changes);
        }
    }
    let changes = val_changes.expect("val split");
    let mut rows = Vec::new();
    for m in count_grid(ctx.cfg) {
        let recs = changes.records(m)?;
        let lcr: Vec<f64> = recs.iter().map(|r| r.lcr()).collect();
        let wrong: Vec<bool> = recs.iter().map(|r| r.is_wrong).collect();
        let a = detector::auroc(&lcr, &wrong)?;
        out.metric(format!("auroc_val_at_{m}"), a);
        rows.push(vec![m.to_string(), a.to_string()]);
    }
    table::write_csv(
        &ctx.path("auroc_vs_mutants.csv"),
        &["mutants", "auroc_val"].map(String::from),
        rows,
    )?;
    out.file("auroc_vs_mutants.csv");
    out.metric(
        "auroc_val",
        out.metrics[&format!("auroc_val_at_{}", set.len())],
    );
    Ok(out)
}

fn read_lcr_scores(ctx: &Ctx, split: &str) -> Result<ScoreTable> {
    let count = ctx.cfg.mutation.count;
    let recs = read_lcr_csv(&ctx.path(&format!("lcr_{split}.csv")), count)?;
    Ok(ScoreTable::new(
        recs.iter().map(|r| r.sample_id).collect(),
        recs.iter().map(|r| r.is_wrong).collect(),
    )
    .with("lcr", recs.iter().map(|r| r.lcr()).collect()))
}

pub fn lcr_threshold(ctx: &Ctx) -> Result<Output> {
    let val = read_lcr_scores(ctx, "val")?;
    let roc = roc_curve(val.column("lcr")?, &val.is_wrong)?;
    roc.write_csv(&ctx.path("roc_lcr_val.csv"))?;
    let mut out = Output::default();
    out.file("roc_lcr_val.csv");
    out.metric("auroc_val", roc.auroc);
    let d = select_threshold(&roc, ctx.cfg.threshold)?;
    out.decision("", &d);
    let test = read_lcr_scores(ctx, "test")?;
    let c = confusion_report(test.column("lcr")?, &test.is_wrong, d.threshold)?;
    if let Some(r) = c.recall_correct() {
        out.metric("test_recall_correct", r);
    }
    if let Some(r) = c.recall_wrong() {
        out.metric("test_recall_wrong", r);
    }
    Ok(out)
}

/// Conductance-detector scores and LCR of one split, aligned by sample. The
/// training split uses out-of-fold scores.
fn unified_inputs(ctx: &Ctx, split: &str) -> Result<ScoreTable> {
    let cond = if split == "train" {
        ctx.scores(OOF_SCORES)?
    } else {
        ctx.scores(&format!("cond_scores_{split}.csv"))?
    };
    let lcr = read_lcr_scores(ctx, split)?;
    if cond.ids != lcr.ids || cond.is_wrong != lcr.is_wrong {
        return Err(Error::InvalidArgument(format!(
            "{split}: conductance and LCR files disagree on samples or labels"
        )));
    }
    Ok(ScoreTable::new(cond.ids.clone(), cond.is_wrong.clone())
        .with("conductance", cond.column("score")?.to_vec())
        .with("lcr", lcr.column("lcr")?.to_vec()))
}

pub fn unified(ctx: &Ctx) -> Result<Output> {
    let [train, val, test] = SPLITS.map(|s| unified_inputs(ctx, s));
    let (train, mut val, mut test) = (train?, val?, test?);
    let mut out = Output::default();
    let cols = |t: &ScoreTable| -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((t.column("conductance")?.to_vec(), t.column("lcr")?.to_vec()))
    };
    let (tc, tl) = cols(&train)?;
    let (vc, vl) = cols(&val)?;
    let (sc, sl) = cols(&test)?;
    for &kind in &ctx.cfg.unified.kinds {
        let det = detector::train_unified(
            &tc,
            &tl,
            &train.is_wrong,
            kind,
            Some((&vc, &vl, &val.is_wrong)),
            &ctx.cfg.detector_config(),
        )?;
        let rel = format!("unified_{}.bin", kind.name());
        det.save(ctx.path(&rel))?;
        out.file(rel);
        let vs = det.score_all(&detector::unified_features(&vc, &vl)?)?;
        let ts = det.score_all(&detector::unified_features(&sc, &sl)?)?;
        out.metric(
            format!("auroc_val_{}", kind.name()),
            detector::auroc(&vs, &val.is_wrong)?,
        );
        if let Ok(a) = detector::auroc(&ts, &test.is_wrong) {
            out.metric(format!("auroc_test_{}", kind.name()), a);
        }
        val = val.with(kind.name(), vs);
        test = test.with(kind.name(), ts);
    }
    for (t, name) in [(&val, "val"), (&test, "test")] {
        let rel = format!("unified_scores_{name}.csv");
        t.write(&ctx.path(&rel))?;
        out.file(rel);
    }
    let verdict = ctx.cfg.unified.verdict.name();
    let roc = roc_curve(val.column(verdict)?, &val.is_wrong)?;
    roc.write_csv(&ctx.path("roc_unified_val.csv"))?;
    out.file("roc_unified_val.csv");
    Ok(out)
}

pub fn verdict(ctx: &Ctx) -> Result<Output> {
    let kind: DetectorKind = ctx.cfg.unified.verdict;
    let val = ctx.scores("unified_scores_val.csv")?;
    let test = ctx.scores("unified_scores_test.csv")?;
    let roc = roc_curve(val.column(kind.name())?, &val.is_wrong)?;
    let d = select_threshold(&roc, ctx.cfg.threshold)?;
    let scores = test.column(kind.name())?;
    let c = confusion_report(scores, &test.is_wrong, d.threshold)?;
    ScoreTable::new(test.ids.clone(), test.is_wrong.clone())
        .with("score", scores.to_vec())
        .with(
            "flagged",
            scores
                .iter()
                .map(|&s| (s >= d.threshold) as u8 as f64)
                .collect(),
        )
        .write(&ctx.path("verdicts_test.csv"))?;
    let mut out = Output::default();
    out.file("verdicts_test.csv");
    out.decision("", &d);
    out.metric("caught", c.caught as f64);
    out.metric("missed", c.missed as f64);
    out.metric("false_alarms", c.false_alarms as f64);
    out.metric("passed", c.passed as f64);
    if let Some(r) = c.recall_wrong() {
        out.metric("test_recall_wrong", r);
    }
    if let Some(r) = c.recall_correct() {
        out.metric("test_recall_correct", r);
    }
    // accuracy of the predictions that survive the filter
    let kept = c.missed + c.passed;
    if kept > 0 {
        out.metric("retained_accuracy", c.passed as f64 / kept as f64);
    }
    Ok(out)
}

pub fn report(ctx: &Ctx) -> Result<Output> {
    report::render(ctx)
}
