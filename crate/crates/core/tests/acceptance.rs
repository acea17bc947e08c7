//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.
//!
//! Criteria 1 and 5 to 10 use the MNIST desk run described by
//! `configs/mnist_desk.toml`. The run is resumed from its output directory, so
//! only missing or modified stages are recomputed. Without the MNIST files those
//! criteria fail with the loading error.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use condlcr::attribution::{
    conductance, feature_map_conductance, neuron_conductance_direct, neuron_conductance_fast,
    PathSpec,
};
use condlcr::data::Dataset;
use condlcr::detector::{auroc, auroc_pair_oracle, roc_curve, select_threshold, ThresholdPolicy};
use condlcr::model::{Checkpoint, LayerSpec, Model, ModelSpec};
use condlcr::mutation::{read_lcr_csv, MutantSet};
use condlcr::pipeline::{self, RunConfig, RunManifest, RunOptions};
use condlcr::tensor::finite_diff_gradient;
use condlcr::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Check = Result<String, String>;

fn configs() -> PathBuf {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    p.canonicalize().unwrap_or(p)
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// tiny random models

fn tiny_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    loop {
        let side = rng.random_range(5..=8);
        let channels = rng.random_range(1..=2);
        let mut layers = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            layers.push(LayerSpec::Conv {
                out_channels: rng.random_range(1..=3),
                kernel: rng.random_range(2..=3),
                stride: 1,
                padding: rng.random_range(0..=1),
                activation: condlcr::model::Activation::Relu,
            });
            if rng.random_bool(0.5) {
                layers.push(LayerSpec::Pool {
                    kind: condlcr::model::PoolKind::Max,
                    size: 2,
                });
            }
        }
        let num_classes = rng.random_range(2..=4);
        layers.push(LayerSpec::Dense {
            width: num_classes,
            activation: condlcr::model::Activation::Identity,
        });
        let spec = ModelSpec {
            input_shape: [channels, side, side],
            num_classes,
            layers,
        };
        if spec.validate().is_ok() {
            let m = Model::init(spec.clone(), 0).expect("valid spec");
            if m.param_count() <= 500 {
                return spec;
            }
        }
    }
}

fn tiny_model(rng: &mut ChaCha8Rng, biased: bool) -> Model {
    let spec = tiny_spec(rng);
    let mut m = Model::init(spec, rng.random()).expect("valid spec");
    if biased {
        for p in m.params_mut().iter_mut().flatten() {
            for b in p.bias.data_mut() {
                *b = rng.random_range(-0.3..0.3);
            }
        }
    }
    m
}

fn random_input(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(0.0..1.0))
}

// ---------------------------------------------------------------------------
// criteria 2 to 4 and the random half of 9

/// Finite differences at `eps` and `eps / 10` agree unless a ReLU or max-pool
/// boundary lies within reach, in which case the point is moved.
fn smooth_fd(f: &dyn Fn(&Tensor) -> f64, x: &Tensor, eps: f64) -> Option<Tensor> {
    let a = finite_diff_gradient(f, x, eps).ok()?;
    let b = finite_diff_gradient(f, x, eps / 10.0).ok()?;
    let scale = a.max_abs().max(1.0);
    a.data()
        .iter()
        .zip(b.data())
        .all(|(p, q)| (p - q).abs() <= 1e-7 * scale)
        .then_some(a)
}

/// Componentwise relative error, with denominators floored at 1e-4 so that
/// components at roundoff level do not dominate.
fn max_rel_err(a: &Tensor, b: &Tensor) -> f64 {
    a.data()
        .iter()
        .zip(b.data())
        .map(|(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

fn gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let eps = 1e-5;
    let (mut worst, mut components, mut moved) = (0.0f64, 0usize, 0usize);
    for case in 0..100 {
        let model = tiny_model(&mut rng, true);
        let c = rng.random_range(0..model.num_classes());
        let shape = model.spec().input_shape;
        let mut x = random_input(&mut rng, &shape);

        // input gradient
        let fx = |t: &Tensor| model.forward(t).unwrap().data()[c];
        let mut tries = 0;
        let fd = loop {
            if let Some(g) = smooth_fd(&fx, &x, eps) {
                break g;
            }
            tries += 1;
            moved += 1;
            if tries > 20 {
                return Err(format!("case {case}: no kink-free input found"));
            }
            x = random_input(&mut rng, &shape);
        };
        let rec = model.forward_record(&x).map_err(|e| e.to_string())?;
        let g = rec
            .tape
            .backward(rec.output, c)
            .map_err(|e| e.to_string())?;
        let gx = g.get(rec.input).ok_or("no input gradient")?;
        worst = worst.max(max_rel_err(gx, &fd));
        components += fd.len();

        // weight and bias gradients
        for (layer, nodes) in rec.params.iter().enumerate() {
            let Some((wn, bn)) = *nodes else { continue };
            for (node, is_bias) in [(wn, false), (bn, true)] {
                let f = |t: &Tensor| {
                    let mut m = model.clone();
                    let p = m.params_mut()[layer].as_mut().unwrap();
                    if is_bias {
                        p.bias = t.clone();
                    } else {
                        p.weight = t.clone();
                    }
                    m.forward(&x).unwrap().data()[c]
                };
                let p = model.params()[layer].as_ref().unwrap();
                let at = if is_bias { &p.bias } else { &p.weight };
                let Some(fd) = smooth_fd(&f, at, eps) else {
                    moved += 1;
                    continue;
                };
                let ga = g.get(node).ok_or("no parameter gradient")?;
                worst = worst.max(max_rel_err(ga, &fd));
                components += fd.len();
            }
        }
    }
    ensure(
        worst < 1e-5,
        format!("max relative error {worst:.2e} over {components} components, {moved} kink-adjacent points skipped or moved"),
    )
}

fn fast_vs_direct() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let model = tiny_model(&mut rng, false);
        let spec = model.spec().clone();
        let convs = spec.conv_layer_indices();
        let layer = spec.layer_name(convs[rng.random_range(0..convs.len())]);
        let x = random_input(&mut rng, &spec.input_shape);
        let path = PathSpec::zero(&spec.input_shape, rng.random_range(4..=16))
            .map_err(|e| e.to_string())?;
        let c = model.predict_class(&x).map_err(|e| e.to_string())?;
        let fast =
            neuron_conductance_fast(&model, &x, &path, c, &layer).map_err(|e| e.to_string())?;
        let direct =
            neuron_conductance_direct(&model, &x, &path, c, &layer).map_err(|e| e.to_string())?;
        let diff = fast.sub(&direct).map_err(|e| e.to_string())?.max_abs();
        let rel = diff / direct.max_abs().max(1e-12);
        if rel > 1e-6 {
            return Err(format!("case {case} ({layer}): relative error {rel:.2e}"));
        }
        worst = worst.max(rel);
    }
    Ok(format!("20 cases, max relative error {worst:.2e}"))
}

fn random_scores(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<bool>) {
    let n = rng.random_range(2..=150);
    let levels = rng.random_range(2..=12);
    let tied = rng.random_bool(0.6);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
    labels[0] = true;
    labels[1] = false;
    let scores = (0..n)
        .map(|_| {
            if tied {
                rng.random_range(0..levels) as f64 / levels as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect();
    (scores, labels)
}

fn auroc_equivalence() -> Check {
    let hand =
        auroc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).map_err(|e| e.to_string())?;
    if hand != 0.75 {
        return Err(format!("hand case gave {hand}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (s, l) = random_scores(&mut rng);
        let a = auroc(&s, &l).map_err(|e| e.to_string())?;
        let b = auroc_pair_oracle(&s, &l).map_err(|e| e.to_string())?;
        worst = worst.max((a - b).abs());
    }
    ensure(
        worst <= 1e-12,
        format!("hand case 0.75, 1000 sets, max difference {worst:.1e}"),
    )
}

/// `(recall_correct, recall_wrong)` when flagging `score >= t`, counted directly.
fn recalls(scores: &[f64], wrong: &[bool], t: f64) -> (f64, f64) {
    let (mut pass, mut nc, mut caught, mut nw) = (0, 0, 0, 0);
    for (&s, &w) in scores.iter().zip(wrong) {
        if w {
            nw += 1;
            caught += (s >= t) as usize;
        } else {
            nc += 1;
            pass += (s < t) as usize;
        }
    }
    (pass as f64 / nc as f64, caught as f64 / nw as f64)
}

/// Gap of the chosen threshold minus the smallest gap over every candidate
/// threshold; non-positive when the choice is optimal.
fn equal_recall_excess(scores: &[f64], wrong: &[bool], chosen: f64) -> f64 {
    let gap = |t: f64| {
        let (rc, rw) = recalls(scores, wrong, t);
        (rc - rw).abs()
    };
    let mut cands: Vec<f64> = scores.to_vec();
    cands.push(f64::INFINITY);
    let best = cands.into_iter().map(gap).fold(f64::INFINITY, f64::min);
    gap(chosen) - best
}

// ---------------------------------------------------------------------------
// desk run

struct Desk {
    cfg: RunConfig,
    manifest: RunManifest,
    model: Model,
    val: Dataset,
    test: Dataset,
    mutants: MutantSet,
    /// Original model's validation predictions.
    val_pred: Vec<usize>,
    /// `mutant_pred[m][i]`: prediction of mutant `m` on validation sample `i`,
    /// from a full forward pass of the mutated model.
    mutant_pred: Vec<Vec<usize>>,
}

fn predictions(model: &Model, set: &Dataset) -> Vec<usize> {
    set.images()
        .par_iter()
        .map(|x| model.predict_class(x).expect("forward"))
        .collect()
}

fn desk() -> Result<Desk, String> {
    let cfg = RunConfig::load(&configs().join("mnist_desk.toml")).map_err(|e| e.to_string())?;
    let opts = RunOptions {
        resume: true,
        ..RunOptions::default()
    };
    let manifest = pipeline::run_pipeline(&cfg, &opts).map_err(|e| e.to_string())?;
    let [_, val, test] = pipeline::load_splits(&cfg).map_err(|e| e.to_string())?;
    let model = Checkpoint::load(cfg.out_dir.join("model.ckpt"))
        .map_err(|e| e.to_string())?
        .model;
    let mutants = MutantSet::load(cfg.out_dir.join("mutants.bin")).map_err(|e| e.to_string())?;
    let val_pred = predictions(&model, &val);
    let mutant_pred = mutants
        .mutants
        .iter()
        .map(|m| predictions(&m.apply(&model).expect("delta fits"), &val))
        .collect();
    Ok(Desk {
        cfg,
        manifest,
        model,
        val,
        test,
        mutants,
        val_pred,
        mutant_pred,
    })
}

impl Desk {
    fn seconds(&self, stages: &[&str]) -> f64 {
        self.manifest
            .stages
            .iter()
            .filter(|s| stages.is_empty() || stages.contains(&s.name.as_str()))
            .map(|s| s.seconds)
            .sum()
    }

    fn metric(&self, stage: &str, key: &str) -> Result<f64, String> {
        self.manifest
            .metric(stage, key)
            .ok_or_else(|| format!("manifest has no {stage}.{key}"))
    }

    fn val_wrong(&self) -> Vec<bool> {
        self.val_pred
            .iter()
            .zip(self.val.labels())
            .map(|(p, l)| p != l)
            .collect()
    }

    /// Label change rate of every validation sample over the first `m` mutants.
    fn lcr(&self, m: usize) -> Vec<f64> {
        (0..self.val.len())
            .map(|i| {
                let changed = self.mutant_pred[..m]
                    .iter()
                    .filter(|p| p[i] != self.val_pred[i])
                    .count();
                changed as f64 / m as f64
            })
            .collect()
    }

    fn columns(&self, file: &str) -> Result<BTreeMap<String, Vec<String>>, String> {
        let path = self.cfg.out_dir.join(file);
        let mut r =
            csv::Reader::from_path(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| e.to_string())?
            .iter()
            .map(String::from)
            .collect();
        let mut cols: BTreeMap<String, Vec<String>> =
            header.iter().map(|h| (h.clone(), Vec::new())).collect();
        for row in r.records() {
            let row = row.map_err(|e| e.to_string())?;
            for (h, v) in header.iter().zip(row.iter()) {
                cols.get_mut(h).unwrap().push(v.to_owned());
            }
        }
        Ok(cols)
    }

    /// Scores in `column` of `file` with the wrong-prediction labels.
    fn scores(&self, file: &str, column: &str) -> Result<(Vec<f64>, Vec<bool>), String> {
        let cols = self.columns(file)?;
        let get = |c: &str| cols.get(c).ok_or(format!("{file} has no column {c}"));
        let scores = get(column)?
            .iter()
            .map(|v| v.parse::<f64>().map_err(|e| format!("{file}: {e}")))
            .collect::<Result<Vec<_>, _>>()?;
        let wrong = get("is_wrong")?.iter().map(|v| v == "1").collect();
        Ok((scores, wrong))
    }
}

fn completeness(d: &Desk) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut picks: Vec<usize> = (0..d.test.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(200);
    let layer = d
        .cfg
        .attribution
        .layer
        .clone()
        .unwrap_or_else(|| d.model.spec().last_conv_layer());
    let shape = d.model.spec().input_shape;
    let path = PathSpec::zero(&shape, 100).map_err(|e| e.to_string())?;
    let within: Vec<bool> = picks
        .par_iter()
        .map(|&i| {
            let x = &d.test.images()[i];
            let c = d.model.predict_class(x).expect("forward");
            let cond = conductance(&d.model, x, &path, c, &layer).expect("conductance");
            let total: f64 = feature_map_conductance(&cond.neurons).unwrap().iter().sum();
            let delta = cond.score - cond.baseline_score;
            (total - delta).abs() <= (0.01 * delta.abs()).max(1e-6)
        })
        .collect();
    let ok = within.iter().filter(|&&b| b).count();
    ensure(
        ok * 100 >= 95 * within.len(),
        format!(
            "{ok}/{} test inputs within tolerance at n=100 on {layer}",
            within.len()
        ),
    )
}

fn lcr_directionality(d: &Desk) -> Check {
    if d.mutants.len() != 100 {
        return Err(format!("{} valid mutants, need 100", d.mutants.len()));
    }
    // the stored per-sample rates must match the independent recomputation
    let stored = read_lcr_csv(&d.cfg.out_dir.join("lcr_val.csv"), d.mutants.len())
        .map_err(|e| e.to_string())?;
    let lcr = d.lcr(100);
    for (r, (&mine, &id)) in stored.iter().zip(lcr.iter().zip(d.val.ids())) {
        if r.sample_id != id || (r.lcr() - mine).abs() > 1e-12 {
            return Err(format!("lcr_val.csv disagrees at sample {id}"));
        }
    }
    let wrong = d.val_wrong();
    let mean = |w: bool| {
        let v: Vec<f64> = lcr
            .iter()
            .zip(&wrong)
            .filter(|p| *p.1 == w)
            .map(|p| *p.0)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let (mc, mw) = (mean(false), mean(true));
    let secs = d.seconds(&["mutants", "lcr"]);
    ensure(
        mw >= 2.0 * mc && secs < 900.0,
        format!(
            "mean LCR wrong {mw:.4} vs correct {mc:.4} (ratio {:.1}); mutants + lcr stages {secs:.0}s",
            mw / mc
        ),
    )
}

fn validity(d: &Desk) -> Check {
    let labels = d.val.labels();
    let acc = |p: &[usize]| {
        p.iter().zip(labels).filter(|(a, b)| a == b).count() as f64 / labels.len() as f64
    };
    let original = acc(&d.val_pred);
    let floor = 0.9 * original;
    let accs: Vec<f64> = d.mutant_pred.iter().map(|p| acc(p)).collect();
    let bad = accs.iter().filter(|&&a| a < floor).count();
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        bad == 0 && !accs.is_empty(),
        format!(
            "{}/{} mutants at or above {floor:.4}; lowest {min:.4}, original {original:.4}",
            accs.len() - bad,
            accs.len()
        ),
    )
}

fn detector_quality(d: &Desk) -> Check {
    let pred = predictions(&d.model, &d.test);
    let acc = pred
        .iter()
        .zip(d.test.labels())
        .filter(|(a, b)| a == b)
        .count() as f64
        / d.test.len() as f64;
    let (s, w) = d.scores("cond_scores_val.csv", "score")?;
    let a = auroc_pair_oracle(&s, &w).map_err(|e| e.to_string())?;
    let secs = d.seconds(&[]);
    ensure(
        acc >= 0.95 && a >= 0.80 && secs < 45.0 * 60.0,
        format!(
            "test accuracy {acc:.4}, conductance val AUROC {a:.4}, pipeline {:.1} min",
            secs / 60.0
        ),
    )
}

fn unified_dominance(d: &Desk) -> Check {
    let file = "unified_scores_val.csv";
    let verdict = d.cfg.unified.verdict.name();
    let auc = |col: &str| -> Result<f64, String> {
        let (s, w) = d.scores(file, col)?;
        auroc_pair_oracle(&s, &w).map_err(|e| e.to_string())
    };
    let (c, l, u) = (auc("conductance")?, auc("lcr")?, auc(verdict)?);
    ensure(
        u >= c.max(l) - 0.01,
        format!("{verdict} {u:.4} vs conductance {c:.4}, lcr {l:.4}"),
    )
}

fn equal_recall(d: Option<&Desk>) -> Check {
    let mut detail = Vec::new();
    if let Some(d) = d {
        let runs = [
            ("detector", "cond_scores_val.csv", "score"),
            ("lcr_threshold", "lcr_val.csv", "lcr"),
            (
                "verdict",
                "unified_scores_val.csv",
                d.cfg.unified.verdict.name(),
            ),
        ];
        for (stage, file, col) in runs {
            let (s, w) = d.scores(file, col)?;
            let t = d.metric(stage, "threshold")?;
            let excess = equal_recall_excess(&s, &w, t);
            if excess > 1e-12 {
                return Err(format!(
                    "{stage}: threshold {t} is {excess:.3e} from the best gap"
                ));
            }
            let (rc, rw) = recalls(&s, &w, t);
            detail.push(format!("{stage} gap {:.4}", (rc - rw).abs()));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for case in 0..500 {
        let (s, w) = random_scores(&mut rng);
        let roc = roc_curve(&s, &w).map_err(|e| e.to_string())?;
        let t = select_threshold(&roc, ThresholdPolicy::EqualRecall)
            .map_err(|e| e.to_string())?
            .threshold;
        let excess = equal_recall_excess(&s, &w, t);
        if excess > 1e-12 {
            return Err(format!("random set {case}: {excess:.3e} from the best gap"));
        }
    }
    detail.push("500 random sets optimal".into());
    Ok(detail.join(", "))
}

fn saturation(d: &Desk) -> Check {
    if d.mutant_pred.len() < 100 {
        return Err(format!("{} mutants, need 100", d.mutant_pred.len()));
    }
    let wrong = d.val_wrong();
    let a60 = auroc(&d.lcr(60), &wrong).map_err(|e| e.to_string())?;
    let a100 = auroc(&d.lcr(100), &wrong).map_err(|e| e.to_string())?;
    ensure(
        (a60 - a100).abs() <= 0.02,
        format!("LCR AUROC {a60:.4} at 60 mutants, {a100:.4} at 100"),
    )
}

fn determinism() -> Check {
    let cfg = RunConfig::load(&configs().join("smoke.toml")).map_err(|e| e.to_string())?;
    let mut prints = BTreeSet::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut c = cfg.clone();
        c.out_dir = dir.path().to_path_buf();
        let m = pipeline::run_pipeline(&c, &RunOptions::default()).map_err(|e| e.to_string())?;
        if m.stages.len() != 11 {
            return Err(format!("run recorded {} stages", m.stages.len()));
        }
        prints.insert(m.fingerprint());
    }
    ensure(
        prints.len() == 1,
        "two full smoke runs, manifests identical apart from timings".into(),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    // optional criterion numbers, e.g. `cargo test --test acceptance -- 2 3`
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let wanted = |n: usize| only.is_empty() || only.contains(&n);

    let desk = if [1, 5, 6, 7, 8, 9, 10].into_iter().any(wanted) {
        let t = Instant::now();
        let d = desk();
        match &d {
            Ok(d) => println!(
                "desk run in {} ({:.0}s including mutant replay)",
                d.cfg.out_dir.display(),
                t.elapsed().as_secs_f64()
            ),
            Err(e) => println!("desk run unavailable: {e}"),
        }
        d
    } else {
        Err("not requested".into())
    };
    let on_desk = |f: fn(&Desk) -> Check| match &desk {
        Ok(d) => f(d),
        Err(e) => Err(format!("desk run unavailable: {e}")),
    };
    let timed = |res: Check, start: Instant, limit: f64| {
        res.and_then(|d| {
            let s = start.elapsed().as_secs_f64();
            ensure(s < limit, format!("{d}; limit {limit:.0}s"))
        })
    };

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Check + '_>)> = vec![
        (
            1,
            "completeness",
            Box::new(|| {
                let t = Instant::now();
                timed(on_desk(completeness), t, 300.0)
            }),
        ),
        (
            2,
            "gradients",
            Box::new(|| {
                let t = Instant::now();
                timed(gradients(), t, 60.0)
            }),
        ),
        (
            3,
            "fast vs direct conductance",
            Box::new(|| {
                let t = Instant::now();
                timed(fast_vs_direct(), t, 60.0)
            }),
        ),
        (4, "auroc oracle", Box::new(auroc_equivalence)),
        (
            5,
            "lcr directionality",
            Box::new(|| on_desk(lcr_directionality)),
        ),
        (6, "mutant validity", Box::new(|| on_desk(validity))),
        (
            7,
            "detector quality",
            Box::new(|| on_desk(detector_quality)),
        ),
        (
            8,
            "unified dominance",
            Box::new(|| on_desk(unified_dominance)),
        ),
        (
            9,
            "equal recall threshold",
            Box::new(|| match &desk {
                Ok(d) => equal_recall(Some(d)),
                Err(e) => equal_recall(None).and(Err(format!("desk run unavailable: {e}"))),
            }),
        ),
        (
            10,
            "mutant count saturation",
            Box::new(|| on_desk(saturation)),
        ),
        (11, "determinism", Box::new(determinism)),
    ];

    let (mut ran, mut failed) = (0, 0);
    for (n, name, check) in &criteria {
        if !wanted(*n) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let res = check();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(d) => println!("[PASS] {n:>2} {name}: {d} ({secs:.1}s)"),
            Err(d) => {
                failed += 1;
                println!("[FAIL] {n:>2} {name}: {d} ({secs:.1}s)");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
