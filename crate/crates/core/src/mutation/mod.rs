//! Kernel-level weight mutants, the validity filter, and label change rate.
//!
//! A mutable weight is one 2-D kernel `weight[o, c, .., ..]` of a convolutional
//! layer. Dense layers are never touched.

mod eval;
mod file;
mod lcr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use eval::{predict_mutants, MutantPredictions};
pub use file::DELTA_VERSION;
pub use lcr::{
    label_changes, lcr, lcr_dataset, lcr_summary, read_lcr_csv, write_lcr_csv, GroupStats,
    LabelChanges, LcrRecord, LcrSummary,
};

use crate::data::Dataset;
use crate::model::{LayerSpec, Model};
use crate::{Error, Result};

/// The published rate grid: 0.1%, 0.15%, 0.2% and 0.25% of all kernels.
pub const DEFAULT_RATES: [f64; 4] = [0.001, 0.0015, 0.002, 0.0025];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    /// Gaussian fuzzing: add noise scaled by the layer's weight std.
    #[serde(rename = "GF")]
    Gf,
    /// Neuron activation inverse: negate the kernel.
    #[serde(rename = "NAI")]
    Nai,
    /// Weight shuffling: permute the kernel's entries.
    #[serde(rename = "WS")]
    Ws,
    /// Neuron switch: swap with another kernel of the same layer.
    #[serde(rename = "NS")]
    Ns,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Gf, Operator::Nai, Operator::Ws, Operator::Ns];

    pub fn name(self) -> &'static str {
        match self {
            Operator::Gf => "GF",
            Operator::Nai => "NAI",
            Operator::Ws => "WS",
            Operator::Ns => "NS",
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|op| op.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown mutation operator {s:?}")))
    }
}

fn default_floor() -> f64 {
    0.9
}

fn default_gf_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    pub operator: Operator,
    /// Fraction of all conv kernels to mutate.
    pub rate: f64,
    /// Number of valid mutants to collect.
    pub count: usize,
    pub seed: u64,
    /// Minimum mutant validation accuracy as a fraction of the original's.
    #[serde(default = "default_floor")]
    pub validity_floor: f64,
    /// GF noise std in units of the layer's weight std.
    #[serde(default = "default_gf_scale")]
    pub gf_scale: f64,
}

impl MutationConfig {
    pub fn new(operator: Operator, rate: f64, count: usize, seed: u64) -> Self {
        Self {
            operator,
            rate,
            count,
            seed,
            validity_floor: default_floor(),
            gf_scale: default_gf_scale(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mutation rate must lie in (0,1), got {}",
                self.rate
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument(
                "mutant count must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.validity_floor) {
            return Err(Error::InvalidArgument(format!(
                "validity floor must lie in [0,1], got {}",
                self.validity_floor
            )));
        }
        if !(self.gf_scale >= 0.0 && self.gf_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "GF scale must be finite and >= 0, got {}",
                self.gf_scale
            )));
        }
        Ok(())
    }
}

/// New contents of one kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelDelta {
    /// Layer index in the model.
    pub layer: usize,
    /// Kernel index `o * in_channels + c` within the layer.
    pub kernel: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mutant {
    pub operator: Operator,
    pub rate: f64,
    pub seed: u64,
    /// Sorted by `(layer, kernel)`.
    pub deltas: Vec<KernelDelta>,
    pub val_accuracy: Option<f64>,
}

impl Mutant {
    /// The original model with this mutant's kernels written in.
    pub fn apply(&self, model: &Model) -> Result<Model> {
        let mut m = model.clone();
        for d in &self.deltas {
            let (_, size) = kernel_layout(model, d.layer)?;
            let p = m.params_mut()[d.layer].as_mut().expect("conv params");
            let len = p.weight.len() / size;
            if d.kernel >= len || d.values.len() != size {
                return Err(Error::InvalidArgument(format!(
                    "delta for kernel {} of layer {} does not fit ({} kernels of {size} values)",
                    d.kernel, d.layer, len
                )));
            }
            p.weight.data_mut()[d.kernel * size..(d.kernel + 1) * size].copy_from_slice(&d.values);
        }
        Ok(m)
    }

    /// First layer any delta touches.
    pub fn first_layer(&self) -> Option<usize> {
        self.deltas.first().map(|d| d.layer)
    }
}

/// `(kernel count, values per kernel)` of conv layer `layer`.
fn kernel_layout(model: &Model, layer: usize) -> Result<(usize, usize)> {
    match model.spec().layers.get(layer) {
        Some(LayerSpec::Conv { .. }) => {
            let s = model.params()[layer]
                .as_ref()
                .expect("conv params")
                .weight
                .shape();
            Ok((s[0] * s[1], s[2] * s[3]))
        }
        _ => Err(Error::InvalidArgument(format!(
            "layer {layer} is not convolutional"
        ))),
    }
}

/// Every `(layer, kernel)` pair of the model's conv layers.
pub fn kernel_count(model: &Model) -> usize {
    model
        .spec()
        .conv_layer_indices()
        .into_iter()
        .map(|l| kernel_layout(model, l).expect("conv layer").0)
        .sum()
}

/// `ceil(rate * total)`, at least one.
pub fn kernels_for_rate(rate: f64, total: usize) -> usize {
    // the tolerance keeps exact products such as 0.1 * 30 from rounding up
    (((rate * total as f64) - 1e-9).ceil() as usize).clamp(1, total)
}

fn population_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Builds an unvalidated mutant. `gf_scale` only matters for GF.
pub fn generate_mutant(
    model: &Model,
    operator: Operator,
    rate: f64,
    seed: u64,
    gf_scale: f64,
) -> Result<Mutant> {
    let layers: Vec<(usize, usize, usize)> = model
        .spec()
        .conv_layer_indices()
        .into_iter()
        .map(|l| kernel_layout(model, l).map(|(n, size)| (l, n, size)))
        .collect::<Result<_>>()?;
    let total: usize = layers.iter().map(|l| l.1).sum();
    let count = kernels_for_rate(rate, total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut picks: Vec<(usize, usize)> = index::sample(&mut rng, total, count)
        .into_iter()
        .map(|mut g| {
            for &(l, n, _) in &layers {
                if g < n {
                    return (l, g);
                }
                g -= n;
            }
            unreachable!("global kernel index in range")
        })
        .collect();

    // working copies of touched kernels, keyed by (layer, kernel)
    let mut touched: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    let original = |l: usize, k: usize| -> Vec<f64> {
        let size = layers.iter().find(|x| x.0 == l).expect("conv layer").2;
        model.params()[l]
            .as_ref()
            .expect("conv params")
            .weight
            .data()[k * size..(k + 1) * size]
            .to_vec()
    };
    let layer_std = |l: usize| {
        population_std(
            model.params()[l]
                .as_ref()
                .expect("conv params")
                .weight
                .data(),
        )
    };

    for (l, k) in picks.drain(..) {
        let current = touched.remove(&(l, k)).unwrap_or_else(|| original(l, k));
        match operator {
            Operator::Gf => {
                let std = gf_scale * layer_std(l);
                let noisy = if std > 0.0 {
                    let normal =
                        Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    current
                        .iter()
                        .map(|v| v + normal.sample(&mut rng))
                        .collect()
                } else {
                    current
                };
                touched.insert((l, k), noisy);
            }
            Operator::Nai => {
                touched.insert((l, k), current.iter().map(|v| -v).collect());
            }
            Operator::Ws => {
                let mut v = current;
                v.shuffle(&mut rng);
                touched.insert((l, k), v);
            }
            Operator::Ns => {
                let n = layers.iter().find(|x| x.0 == l).expect("conv layer").1;
                if n < 2 {
                    // nothing to switch with
                    touched.insert((l, k), current);
                    continue;
                }
                let mut other = rng.random_range(0..n - 1);
                if other >= k {
                    other += 1;
                }
                let partner = touched
                    .remove(&(l, other))
                    .unwrap_or_else(|| original(l, other));
                touched.insert((l, k), partner);
                touched.insert((l, other), current);
            }
        }
    }

    Ok(Mutant {
        operator,
        rate,
        seed,
        deltas: touched
            .into_iter()
            .map(|((layer, kernel), values)| KernelDelta {
                layer,
                kernel,
                values,
            })
            .collect(),
        val_accuracy: None,
    })
}

/// Seed of generation attempt `attempt` under base seed `seed`.
pub fn attempt_seed(seed: u64, attempt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ attempt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Valid mutants of one configuration plus the bookkeeping behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct MutantSet {
    /// Path of the original checkpoint the deltas apply to.
    pub checkpoint: String,
    pub config: MutationConfig,
    pub original_accuracy: f64,
    /// Candidates generated, accepted or not.
    pub attempts: usize,
    pub mutants: Vec<Mutant>,
}

impl MutantSet {
    pub fn len(&self) -> usize {
        self.mutants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mutants.is_empty()
    }

    pub fn yield_rate(&self) -> f64 {
        self.mutants.len() as f64 / self.attempts.max(1) as f64
    }

    /// The first `m` mutants.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            mutants: self.mutants[..m.min(self.mutants.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Generates candidates with per-attempt seeds until `config.count` of them
/// reach `validity_floor × original accuracy` on `val`, within `10 × count`
/// attempts. Acceptance follows attempt order, so the result only depends on
/// the configuration.
pub fn build_mutant_population(
    model: &Model,
    config: &MutationConfig,
    val: &Dataset,
) -> Result<MutantSet> {
    population_with_changes(model, config, val).map(|(set, _)| set)
}

/// The population together with its label changes on `val`, which fall out of
/// the validity check for free.
pub fn population_with_changes(
    model: &Model,
    config: &MutationConfig,
    val: &Dataset,
) -> Result<(MutantSet, LabelChanges)> {
    config.validate()?;
    if val.is_empty() {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    let budget = config.count * 10;
    let floor_eval = predict_mutants(model, &[], val)?;
    let original_accuracy = floor_eval.accuracy_original(val.labels());
    let floor = config.validity_floor * original_accuracy;

    let mut accepted = Vec::with_capacity(config.count);
    let mut accepted_preds: Vec<Vec<usize>> = Vec::with_capacity(config.count);
    let mut attempts = 0;
    while accepted.len() < config.count && attempts < budget {
        let need = config.count - accepted.len();
        let round = (need + need / 4 + 1).min(budget - attempts);
        let candidates = (attempts..attempts + round)
            .map(|a| {
                generate_mutant(
                    model,
                    config.operator,
                    config.rate,
                    attempt_seed(config.seed, a as u64),
                    config.gf_scale,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let preds = predict_mutants(model, &candidates, val)?;
        for (i, mut m) in candidates.into_iter().enumerate() {
            attempts += 1;
            let acc = preds.accuracy(i, val.labels());
            if acc >= floor {
                m.val_accuracy = Some(acc);
                accepted.push(m);
                accepted_preds.push(preds.mutants[i].clone());
                if accepted.len() == config.count {
                    break;
                }
            }
        }
    }
    if accepted.len() < config.count {
        return Err(Error::BudgetExhausted {
            accepted: accepted.len(),
            attempts,
            wanted: config.count,
            yield_rate: accepted.len() as f64 / attempts.max(1) as f64,
        });
    }
    log::info!(
        "{} {:.3}%: {} mutants from {attempts} attempts",
        config.operator,
        config.rate * 100.0,
        accepted.len()
    );
    let original = floor_eval.original;
    let flips = (0..val.len())
        .map(|s| accepted_preds.iter().map(|m| m[s] != original[s]).collect())
        .collect();
    let changes = LabelChanges {
        sample_ids: val.ids().to_vec(),
        true_class: val.labels().to_vec(),
        pred_class: original,
        flips,
    };
    let set = MutantSet {
        checkpoint: String::new(),
        config: config.clone(),
        original_accuracy,
        attempts,
        mutants: accepted,
    };
    Ok((set, changes))
}

/// One rate of a rate sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub rate: f64,
    pub kernels: usize,
    /// `None` when the population could not be built.
    pub summary: Option<LcrSummary>,
    pub yield_rate: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct RateSweep {
    pub rows: Vec<RateRow>,
    /// Index into `rows` of the rate with the largest LCR difference.
    pub chosen: usize,
    pub population: MutantSet,
    /// Label changes of `population` on the validation set.
    pub changes: LabelChanges,
}

/// Builds a population per rate, summarizes LCR on `val`, and keeps the rate
/// with the largest `lcr_difference`.
pub fn sweep_rates(
    model: &Model,
    base: &MutationConfig,
    rates: &[f64],
    val: &Dataset,
) -> Result<RateSweep> {
    if rates.is_empty() {
        return Err(Error::InvalidArgument("rate grid is empty".into()));
    }
    let total = kernel_count(model);
    let mut rows = Vec::new();
    let mut best: Option<(usize, f64, MutantSet, LabelChanges)> = None;
    for &rate in rates {
        let cfg = MutationConfig {
            rate,
            ..base.clone()
        };
        let kernels = kernels_for_rate(rate, total);
        match population_with_changes(model, &cfg, val) {
            Ok((set, changes)) => {
                let summary = lcr_summary(&changes.records(set.len())?);
                let yield_rate = set.yield_rate();
                if let Some(d) = summary.difference {
                    if best.as_ref().is_none_or(|b| d > b.1) {
                        best = Some((rows.len(), d, set, changes));
                    }
                }
                rows.push(RateRow {
                    rate,
                    kernels,
                    summary: Some(summary),
                    yield_rate,
                    failure: None,
                });
            }
            Err(e @ Error::BudgetExhausted { yield_rate, .. }) => {
                log::warn!("rate {rate}: {e}");
                rows.push(RateRow {
                    rate,
                    kernels,
                    summary: None,
                    yield_rate,
                    failure: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    let (chosen, _, population, changes) = best.ok_or_else(|| {
        Error::Degenerate("no rate produced an LCR difference; validation needs both correct and wrong predictions".into())
    })?;
    Ok(RateSweep {
        rows,
        chosen,
        population,
        changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::tensor::Tensor;

    pub(crate) fn small_model(seed: u64) -> Model {
        Model::init(ModelSpec::desk_default([1, 8, 8], 3), seed).unwrap()
    }

    fn changed_kernels(a: &Model, b: &Model) -> usize {
        let mut n = 0;
        for l in a.spec().conv_layer_indices() {
            let (count, size) = kernel_layout(a, l).unwrap();
            let wa = a.params()[l].as_ref().unwrap().weight.data();
            let wb = b.params()[l].as_ref().unwrap().weight.data();
            n += (0..count)
                .filter(|k| wa[k * size..(k + 1) * size] != wb[k * size..(k + 1) * size])
                .count();
        }
        n
    }

    #[test]
    fn ceiling_of_rate() {
        assert_eq!(kernels_for_rate(0.0001, 528), 1);
        assert_eq!(kernels_for_rate(0.002, 528), 2);
        assert_eq!(kernels_for_rate(0.1, 30), 3);
        assert_eq!(kernels_for_rate(0.999, 4), 4);
    }

    #[test]
    fn tiny_rate_changes_one_kernel() {
        let m = small_model(1);
        assert_eq!(kernel_count(&m), 16 + 512);
        for op in [Operator::Gf, Operator::Nai, Operator::Ws] {
            let mu = generate_mutant(&m, op, 1e-6, 7, 1.0).unwrap();
            assert_eq!(mu.deltas.len(), 1);
            assert_eq!(changed_kernels(&m, &mu.apply(&m).unwrap()), 1, "{op}");
        }
        // the switch partner changes too
        let mu = generate_mutant(&m, Operator::Ns, 1e-6, 7, 1.0).unwrap();
        assert_eq!(changed_kernels(&m, &mu.apply(&m).unwrap()), 2);
    }

    #[test]
    fn exact_kernel_count_and_dense_untouched() {
        let m = small_model(2);
        for (op, rate) in [
            (Operator::Nai, 0.05),
            (Operator::Gf, 0.01),
            (Operator::Ws, 0.2),
        ] {
            let mu = generate_mutant(&m, op, rate, 3, 1.0).unwrap();
            let mm = mu.apply(&m).unwrap();
            assert_eq!(
                changed_kernels(&m, &mm),
                kernels_for_rate(rate, 528),
                "{op}"
            );
            assert_eq!(mm.params()[4], m.params()[4]);
            for l in [0, 2] {
                assert_eq!(
                    mm.params()[l].as_ref().unwrap().bias,
                    m.params()[l].as_ref().unwrap().bias
                );
            }
        }
    }

    #[test]
    fn operator_semantics() {
        let m = small_model(3);
        let size = 9;
        let orig = |d: &KernelDelta| {
            m.params()[d.layer].as_ref().unwrap().weight.data()
                [d.kernel * size..(d.kernel + 1) * size]
                .to_vec()
        };
        let nai = generate_mutant(&m, Operator::Nai, 0.01, 4, 1.0).unwrap();
        for d in &nai.deltas {
            assert_eq!(d.values, orig(d).iter().map(|v| -v).collect::<Vec<_>>());
        }
        let ws = generate_mutant(&m, Operator::Ws, 0.01, 4, 1.0).unwrap();
        for d in &ws.deltas {
            let mut a = d.values.clone();
            let mut b = orig(d);
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
        let ns = generate_mutant(&m, Operator::Ns, 0.003, 4, 1.0).unwrap();
        let mut before: Vec<Vec<f64>> = ns.deltas.iter().map(orig).collect();
        let mut after: Vec<Vec<f64>> = ns.deltas.iter().map(|d| d.values.clone()).collect();
        before.sort_by(|a, b| a.partial_cmp(b).unwrap());
        after.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(before, after, "switching only moves kernels around");
    }

    #[test]
    fn zero_noise_is_identity_and_seeds_repeat() {
        let m = small_model(4);
        let mu = generate_mutant(&m, Operator::Gf, 0.1, 9, 0.0).unwrap();
        assert_eq!(mu.apply(&m).unwrap(), m);
        for op in Operator::ALL {
            assert_eq!(
                generate_mutant(&m, op, 0.02, 11, 1.0).unwrap(),
                generate_mutant(&m, op, 0.02, 11, 1.0).unwrap()
            );
        }
        assert_ne!(
            generate_mutant(&m, Operator::Gf, 0.02, 11, 1.0).unwrap(),
            generate_mutant(&m, Operator::Gf, 0.02, 12, 1.0).unwrap()
        );
    }

    fn toy_val(n: usize) -> Dataset {
        let imgs = (0..n)
            .map(|i| Tensor::from_fn(&[1, 8, 8], |j| ((i * 7 + j * 3) % 11) as f64 / 11.0))
            .collect();
        Dataset::new(
            imgs,
            (0..n).map(|i| i % 3).collect(),
            (0..n as u64).collect(),
            3,
        )
        .unwrap()
    }

    #[test]
    fn floor_zero_accepts_first_candidates() {
        let m = small_model(5);
        let val = toy_val(12);
        let mut cfg = MutationConfig::new(Operator::Gf, 0.3, 6, 21);
        cfg.validity_floor = 0.0;
        cfg.gf_scale = 5.0;
        let set = build_mutant_population(&m, &cfg, &val).unwrap();
        assert_eq!(set.attempts, 6);
        for (a, mu) in set.mutants.iter().enumerate() {
            assert_eq!(mu.seed, attempt_seed(21, a as u64));
        }
        assert_eq!(set, build_mutant_population(&m, &cfg, &val).unwrap());
    }

    #[test]
    fn accepted_mutants_meet_floor() {
        let m = small_model(6);
        let val = toy_val(30);
        let cfg = MutationConfig::new(Operator::Nai, 0.05, 5, 1);
        let set = build_mutant_population(&m, &cfg, &val).unwrap();
        for mu in &set.mutants {
            let acc = crate::model::evaluate(&mu.apply(&m).unwrap(), &val).unwrap();
            assert_eq!(Some(acc), mu.val_accuracy);
            assert!(acc >= 0.9 * set.original_accuracy);
        }
    }

    #[test]
    fn population_changes_match_fresh_evaluation() {
        let m = small_model(8);
        let val = toy_val(25);
        let mut cfg = MutationConfig::new(Operator::Gf, 0.2, 7, 4);
        cfg.validity_floor = 0.5;
        let (set, changes) = population_with_changes(&m, &cfg, &val).unwrap();
        assert_eq!(changes, label_changes(&val, &m, &set).unwrap());
    }

    #[test]
    fn impossible_floor_exhausts_budget() {
        let m = small_model(7);
        let base = toy_val(30);
        // label the samples with the model's own predictions: original accuracy 1
        let labels = base
            .images()
            .iter()
            .map(|x| m.predict_class(x).unwrap())
            .collect();
        let val = Dataset::new(base.images().to_vec(), labels, base.ids().to_vec(), 3).unwrap();
        let mut cfg = MutationConfig::new(Operator::Gf, 0.9, 3, 1);
        cfg.validity_floor = 1.0;
        cfg.gf_scale = 50.0;
        match build_mutant_population(&m, &cfg, &val) {
            Err(Error::BudgetExhausted {
                accepted,
                attempts,
                wanted,
                yield_rate,
            }) => {
                assert_eq!((wanted, attempts), (3, 30));
                assert_eq!(yield_rate, accepted as f64 / 30.0);
            }
            other => panic!("expected budget exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let ok = MutationConfig::new(Operator::Nai, 0.002, 100, 0);
        ok.validate().unwrap();
        assert!(MutationConfig {
            rate: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(MutationConfig {
            rate: 1.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(MutationConfig {
            count: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(MutationConfig {
            validity_floor: 1.5,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(MutationConfig {
            validity_floor: 0.0,
            ..ok.clone()
        }
        .validate()
        .is_ok());
        assert_eq!("nai".parse::<Operator>().unwrap(), Operator::Nai);
        assert!("XX".parse::<Operator>().is_err());
    }
}
