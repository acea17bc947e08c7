//! Tables and figures for a finished run, written under `report/`.
//!
//! Every family gets a CSV and at least one SVG, with file names starting with
//! the family name.

use std::path::Path;

use super::scores::ScoreTable;
use super::stages::{Ctx, Output};
use super::svg;
use crate::detector::{
    auroc, confusion_report, roc_curve, select_threshold, RocCurve, ThresholdPolicy,
};
use crate::table::{self, Rows};
use crate::Result;

pub const REPORT_DIR: &str = "report";

pub const FAMILIES: [&str; 7] = [
    "top3",
    "fig3",
    "lcr_summary",
    "auroc_vs_mutants",
    "roc_overlay",
    "confusion",
    "settings",
];

/// Samples of each correctness group drawn as conductance bar charts.
const SAMPLES_PER_GROUP: usize = 2;

struct Writer<'a> {
    ctx: &'a Ctx<'a>,
    out: Output,
}

impl Writer<'_> {
    fn rel(name: &str) -> String {
        format!("{REPORT_DIR}/{name}")
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let rel = Self::rel(name);
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        table::write_csv(&self.ctx.path(&rel), &header, rows)?;
        self.out.file(rel);
        Ok(())
    }

    fn svg(&mut self, name: &str, body: String) -> Result<()> {
        let rel = Self::rel(name);
        let path = self.ctx.path(&rel);
        std::fs::write(&path, body).map_err(|e| crate::Error::io(&path, e))?;
        self.out.file(rel);
        Ok(())
    }
}

fn num(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

pub fn render(ctx: &Ctx) -> Result<Output> {
    let dir = ctx.path(REPORT_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| crate::Error::io(&dir, e))?;
    let mut w = Writer {
        ctx,
        out: Output::default(),
    };
    top3(&mut w)?;
    fig3(&mut w)?;
    lcr_summary(&mut w)?;
    auroc_vs_mutants(&mut w)?;
    roc_overlay(&mut w)?;
    confusion(&mut w)?;
    settings(&mut w)?;
    Ok(w.out)
}

/// Per predicted class, the three feature maps with the largest mean
/// conductance over training predictions, split by correctness.
fn top3(w: &mut Writer) -> Result<()> {
    let m = w.ctx.conductance("train")?;
    let classes = w.ctx.data.num_classes();
    for (wrong, group) in [(false, "correct"), (true, "wrong")] {
        let mut rows = Vec::new();
        let mut series: [Vec<f64>; 3] = Default::default();
        let mut cats = Vec::new();
        for c in 0..classes {
            let members: Vec<&Vec<f64>> = m
                .rows
                .iter()
                .filter(|r| r.pred_class == c && r.is_wrong == wrong)
                .map(|r| &r.values)
                .collect();
            let mut row = vec![c.to_string(), members.len().to_string()];
            let mut label = format!("{c}");
            if members.is_empty() {
                row.extend(std::iter::repeat_n(String::new(), 6));
                series.iter_mut().for_each(|s| s.push(f64::NAN));
            } else {
                let width = members[0].len();
                let means: Vec<f64> = (0..width)
                    .map(|k| members.iter().map(|v| v[k]).sum::<f64>() / members.len() as f64)
                    .collect();
                let mut order: Vec<usize> = (0..width).collect();
                order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
                for (rank, &k) in order.iter().take(3).enumerate() {
                    row.push(k.to_string());
                    row.push(means[k].to_string());
                    series[rank].push(means[k]);
                }
                for s in series.iter_mut().skip(order.len().min(3)) {
                    s.push(f64::NAN);
                    row.extend([String::new(), String::new()]);
                }
                let top: Vec<String> = order.iter().take(3).map(usize::to_string).collect();
                label = format!("{c}: {}", top.join(","));
            }
            cats.push(label);
            rows.push(row);
        }
        w.csv(
            &format!("top3_{group}.csv"),
            &[
                "class", "n", "fm_1", "mean_1", "fm_2", "mean_2", "fm_3", "mean_3",
            ],
            rows,
        )?;
        let [a, b, c] = series;
        w.svg(
            &format!("top3_{group}.svg"),
            svg::bar_chart(
                &format!("Top-3 mean feature-map conductance, {group} predictions (class: maps)"),
                "mean conductance",
                &cats,
                &[("1st", a), ("2nd", b), ("3rd", c)],
            ),
        )?;
    }
    Ok(())
}

/// Conductance of every feature map for a few validation predictions.
fn fig3(w: &mut Writer) -> Result<()> {
    let m = w.ctx.conductance("val")?;
    let preds = Rows::read(&w.ctx.path("predictions_val.csv"))?;
    preds.expect_header(&[
        "sample_id",
        "true_class",
        "pred_class",
        "is_wrong",
        "softmax_score",
        "presoftmax_score",
    ])?;
    let score_of = |id: u64| -> Result<Option<f64>> {
        for i in 0..preds.records.len() {
            if preds.parse::<u64>(i, 0)? == id {
                return Ok(Some(preds.parse(i, 5)?));
            }
        }
        Ok(None)
    };
    let mut rows = Vec::new();
    for wrong in [false, true] {
        for r in m
            .rows
            .iter()
            .filter(|r| r.is_wrong == wrong)
            .take(SAMPLES_PER_GROUP)
        {
            let score = score_of(r.sample_id)?;
            for (k, v) in r.values.iter().enumerate() {
                rows.push(vec![
                    r.sample_id.to_string(),
                    table::flag(r.is_wrong),
                    r.true_class.to_string(),
                    r.pred_class.to_string(),
                    num(score),
                    k.to_string(),
                    v.to_string(),
                ]);
            }
            let cats: Vec<String> = (0..r.values.len()).map(|k| k.to_string()).collect();
            let title = format!(
                "Sample {}: predicted {} (true {}), pre-softmax score {}",
                r.sample_id,
                r.pred_class,
                r.true_class,
                score.map_or("?".into(), |s| format!("{s:.2}"))
            );
            w.svg(
                &format!("fig3_sample_{}.svg", r.sample_id),
                svg::bar_chart(
                    &title,
                    "feature-map conductance",
                    &cats,
                    &[("conductance", r.values.clone())],
                ),
            )?;
        }
    }
    w.csv(
        "fig3_samples.csv",
        &[
            "sample_id",
            "is_wrong",
            "true_class",
            "pred_class",
            "presoftmax_score",
            "feature_map",
            "conductance",
        ],
        rows,
    )
}

fn lcr_summary(w: &mut Writer) -> Result<()> {
    let t = Rows::read(&w.ctx.path("lcr_grid.csv"))?;
    t.expect_header(&[
        "rate",
        "kernels",
        "yield",
        "mean_correct",
        "std_correct",
        "mean_wrong",
        "std_wrong",
        "lcr_difference",
    ])?;
    let get = |i: usize, c: usize| -> f64 { t.parse(i, c).unwrap_or(f64::NAN) };
    let n = t.records.len();
    let cats: Vec<String> = (0..n).map(|i| format!("{}%", get(i, 0) * 100.0)).collect();
    let series = [
        ("mean LCR correct", (0..n).map(|i| get(i, 3)).collect()),
        ("mean LCR wrong", (0..n).map(|i| get(i, 5)).collect()),
        ("LCR difference", (0..n).map(|i| get(i, 7)).collect()),
    ];
    let rows = t
        .records
        .iter()
        .map(|r| r.iter().map(str::to_owned).collect())
        .collect();
    let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
    w.csv("lcr_summary.csv", &header, rows)?;
    w.svg(
        "lcr_summary.svg",
        svg::bar_chart("LCR on validation by mutation rate", "LCR", &cats, &series),
    )
}

fn auroc_vs_mutants(w: &mut Writer) -> Result<()> {
    let t = Rows::read(&w.ctx.path("auroc_vs_mutants.csv"))?;
    t.expect_header(&["mutants", "auroc_val"])?;
    let pts = (0..t.records.len())
        .map(|i| Ok((t.parse::<f64>(i, 0)?, t.parse::<f64>(i, 1)?)))
        .collect::<Result<Vec<_>>>()?;
    let rows = pts
        .iter()
        .map(|(m, a)| vec![m.to_string(), a.to_string()])
        .collect();
    w.csv("auroc_vs_mutants.csv", &["mutants", "auroc_val"], rows)?;
    let lo = pts.iter().map(|p| p.1).fold(1.0, f64::min).min(0.5);
    w.svg(
        "auroc_vs_mutants.svg",
        svg::line_chart(
            "LCR AUROC on validation vs number of mutants",
            "mutants",
            "AUROC",
            &[("LCR", pts)],
            None,
            Some((lo, 1.0)),
        ),
    )
}

fn roc_overlay(w: &mut Writer) -> Result<()> {
    let curves = [
        ("conductance", "roc_conductance_val.csv"),
        ("lcr", "roc_lcr_val.csv"),
        ("unified", "roc_unified_val.csv"),
    ];
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut names = Vec::new();
    for (name, file) in curves {
        let roc = RocCurve::read_csv(&w.ctx.path(file))?;
        for p in &roc.points {
            rows.push(vec![
                name.to_string(),
                p.threshold.to_string(),
                p.recall_correct.to_string(),
                p.recall_wrong.to_string(),
            ]);
        }
        names.push(format!("{name} ({:.3})", roc.auroc));
        series.push(
            roc.points
                .iter()
                .map(|p| (1.0 - p.recall_correct, p.recall_wrong))
                .collect::<Vec<_>>(),
        );
    }
    w.csv(
        "roc_overlay.csv",
        &["curve", "threshold", "recall_correct", "recall_wrong"],
        rows,
    )?;
    let named: Vec<(&str, Vec<(f64, f64)>)> =
        names.iter().map(String::as_str).zip(series).collect();
    w.svg(
        "roc_overlay.svg",
        svg::line_chart(
            "Validation ROC (AUROC in legend)",
            "1 - recall of correct predictions",
            "recall of wrong predictions",
            &named,
            Some((0.0, 1.0)),
            Some((0.0, 1.0)),
        ),
    )
}

fn confusion(w: &mut Writer) -> Result<()> {
    let t = ScoreTable::read(&w.ctx.path("verdicts_test.csv"))?;
    let flagged = t.column("flagged")?;
    let mut counts = [[0usize; 2]; 2];
    for (&wrong, &f) in t.is_wrong.iter().zip(flagged) {
        counts[usize::from(!wrong)][usize::from(f == 0.0)] += 1;
    }
    let [[caught, missed], [false_alarms, passed]] = counts;
    let ratio = |a: usize, b: usize| (a + b > 0).then(|| a as f64 / (a + b) as f64);
    w.csv(
        "confusion.csv",
        &[
            "caught",
            "missed",
            "false_alarms",
            "passed",
            "recall_wrong",
            "recall_correct",
        ],
        vec![vec![
            caught.to_string(),
            missed.to_string(),
            false_alarms.to_string(),
            passed.to_string(),
            num(ratio(caught, missed)),
            num(ratio(passed, false_alarms)),
        ]],
    )?;
    w.svg(
        "confusion.svg",
        svg::count_grid(
            "Unified classifier verdicts on the test set",
            ["wrong prediction", "correct prediction"],
            ["flagged", "passed"],
            counts,
        ),
    )
}

/// One scorer evaluated under each threshold policy.
struct Scorer {
    features: &'static str,
    model: String,
    val: (Vec<f64>, Vec<bool>),
    test: (Vec<f64>, Vec<bool>),
}

fn scorers(ctx: &Ctx) -> Result<Vec<Scorer>> {
    let pair = |rel: &str, col: &str| -> Result<(Vec<f64>, Vec<bool>)> {
        let t = ScoreTable::read(&ctx.path(rel))?;
        Ok((t.column(col)?.to_vec(), t.is_wrong))
    };
    let lcr = |split: &str| -> Result<(Vec<f64>, Vec<bool>)> {
        pair(&format!("unified_scores_{split}.csv"), "lcr")
    };
    let mut v = vec![
        Scorer {
            features: "conductance",
            model: "mlp_2x200".into(),
            val: pair("cond_scores_val.csv", "score")?,
            test: pair("cond_scores_test.csv", "score")?,
        },
        Scorer {
            features: "lcr",
            model: "threshold".into(),
            val: lcr("val")?,
            test: lcr("test")?,
        },
    ];
    for kind in &ctx.cfg.unified.kinds {
        v.push(Scorer {
            features: "both",
            model: kind.name().into(),
            val: pair("unified_scores_val.csv", kind.name())?,
            test: pair("unified_scores_test.csv", kind.name())?,
        });
    }
    Ok(v)
}

/// Rows of the settings table: scorer by threshold policy.
pub fn settings_policies(cfg_policy: ThresholdPolicy) -> [ThresholdPolicy; 3] {
    let (fc, fw) = match cfg_policy {
        ThresholdPolicy::FavorCorrect { target } => (target, 0.98),
        ThresholdPolicy::FavorWrong { target } => (0.98, target),
        ThresholdPolicy::EqualRecall => (0.98, 0.98),
    };
    [
        ThresholdPolicy::EqualRecall,
        ThresholdPolicy::FavorCorrect { target: fc },
        ThresholdPolicy::FavorWrong { target: fw },
    ]
}

fn settings(w: &mut Writer) -> Result<()> {
    let mut rows = Vec::new();
    let mut cats = Vec::new();
    let (mut rc, mut rw) = (Vec::new(), Vec::new());
    for s in scorers(w.ctx)? {
        let roc = roc_curve(&s.val.0, &s.val.1)?;
        let test_auroc = auroc(&s.test.0, &s.test.1).ok();
        for policy in settings_policies(w.ctx.cfg.threshold) {
            let d = select_threshold(&roc, policy)?;
            let c = confusion_report(&s.test.0, &s.test.1, d.threshold)?;
            rows.push(vec![
                s.features.to_string(),
                s.model.clone(),
                policy.name().to_string(),
                d.threshold.to_string(),
                table::flag(d.attained),
                d.recall_correct.to_string(),
                d.recall_wrong.to_string(),
                num(c.recall_correct()),
                num(c.recall_wrong()),
                roc.auroc.to_string(),
                num(test_auroc),
            ]);
            cats.push(format!("{}/{}", s.model, short(policy)));
            rc.push(d.recall_correct);
            rw.push(d.recall_wrong);
        }
    }
    w.csv(
        "settings.csv",
        &[
            "features",
            "model",
            "policy",
            "threshold",
            "attained",
            "val_recall_correct",
            "val_recall_wrong",
            "test_recall_correct",
            "test_recall_wrong",
            "val_auroc",
            "test_auroc",
        ],
        rows,
    )?;
    w.svg(
        "settings.svg",
        svg::bar_chart(
            "Validation recalls by setting (eq: equal recall, fc/fw: favor correct/wrong)",
            "recall",
            &cats,
            &[("recall correct", rc), ("recall wrong", rw)],
        ),
    )
}

fn short(p: ThresholdPolicy) -> &'static str {
    match p {
        ThresholdPolicy::EqualRecall => "eq",
        ThresholdPolicy::FavorCorrect { .. } => "fc",
        ThresholdPolicy::FavorWrong { .. } => "fw",
    }
}

/// Names of report files present in `dir` for `family`, split into CSV and SVG.
pub fn family_files(dir: &Path, family: &str) -> Result<(Vec<String>, Vec<String>)> {
    let mut csv = Vec::new();
    let mut svg = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| crate::Error::io(dir, e))? {
        let name = e
            .map_err(|e| crate::Error::io(dir, e))?
            .file_name()
            .to_string_lossy()
            .into_owned();
        if !name.starts_with(family) {
            continue;
        }
        if name.ends_with(".csv") {
            csv.push(name);
        } else if name.ends_with(".svg") {
            svg.push(name);
        }
    }
    csv.sort();
    svg.sort();
    Ok((csv, svg))
}
