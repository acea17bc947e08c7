use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, Model, ModelSpec, TrainMeta};
use crate::data::Dataset;
use crate::tensor::{ops, GradScope, Tensor};
use crate::{Error, Result};

/// Minibatch SGD with momentum on softmax cross-entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            momentum: 0.9,
            epochs: 5,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch.
    pub loss: f64,
    /// Fraction of samples classified correctly while the epoch ran.
    pub accuracy: f64,
}

fn check_dataset(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if data.num_classes() > spec.num_classes {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes, model outputs {}",
            data.num_classes(),
            spec.num_classes
        )));
    }
    if let Some(shape) = data.image_shape() {
        if shape != spec.input_shape {
            return Err(Error::shape(
                "train",
                format!("images {shape:?}, model expects {:?}", spec.input_shape),
            ));
        }
    }
    Ok(())
}

/// Trains a freshly initialized model. Deterministic for a given seed: the
/// seed drives both initialization and the per-epoch sample order.
pub fn train(spec: &ModelSpec, data: &Dataset, cfg: &TrainConfig) -> Result<Checkpoint> {
    spec.validate()?;
    check_dataset(spec, data)?;
    if cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut model = Model::init(spec.clone(), cfg.seed)?;
    let mut velocity: Vec<Option<(Tensor, Tensor)>> = model
        .params()
        .iter()
        .map(|p| {
            p.as_ref().map(|p| {
                (
                    Tensor::zeros(p.weight.shape()),
                    Tensor::zeros(p.bias.shape()),
                )
            })
        })
        .collect();
    let mut order_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    order_rng.set_stream(1);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads: Vec<Option<(Tensor, Tensor)>> = velocity
                .iter()
                .map(|v| {
                    v.as_ref()
                        .map(|(w, b)| (Tensor::zeros(w.shape()), Tensor::zeros(b.shape())))
                })
                .collect();
            for &i in chunk {
                let (x, y, _) = data.get(i);
                let rec = model.forward_record(x)?;
                let z = rec.presoftmax().data();
                let loss = ops::log_sum_exp(z) - z[y];
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch, loss });
                }
                loss_sum += loss;
                if crate::tensor::argmax(z) == y {
                    correct += 1;
                }
                let mut seed = ops::softmax(z);
                seed[y] -= 1.0;
                let seed = Tensor::new(vec![seed.len()], seed)?;
                let g = rec
                    .tape
                    .backward_with(rec.output, seed, GradScope::params_only())?;
                for (acc, ids) in grads.iter_mut().zip(&rec.params) {
                    if let (Some((gw, gb)), Some((w, b))) = (acc, ids) {
                        gw.add_assign(g.get(*w).expect("weight gradient"))?;
                        gb.add_assign(g.get(*b).expect("bias gradient"))?;
                    }
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            for ((p, v), g) in model.params_mut().iter_mut().zip(&mut velocity).zip(&grads) {
                if let (Some(p), Some((vw, vb)), Some((gw, gb))) = (p, v, g) {
                    sgd_step(&mut p.weight, vw, gw, scale, cfg);
                    sgd_step(&mut p.bias, vb, gb, scale, cfg);
                    if !p
                        .weight
                        .data()
                        .iter()
                        .chain(p.bias.data())
                        .all(|v| v.is_finite())
                    {
                        return Err(Error::Divergence {
                            epoch,
                            batch,
                            loss: f64::NAN,
                        });
                    }
                }
            }
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
        log::info!(
            "epoch {}: loss {:.4}, train accuracy {:.4}",
            stats.epoch,
            stats.loss,
            stats.accuracy
        );
        history.push(stats);
    }

    Ok(Checkpoint {
        model,
        meta: TrainMeta {
            epochs: cfg.epochs,
            seed: cfg.seed,
            learning_rate: cfg.learning_rate,
            momentum: cfg.momentum,
            batch_size: cfg.batch_size,
            history,
        },
    })
}

fn sgd_step(
    param: &mut Tensor,
    velocity: &mut Tensor,
    grad: &Tensor,
    scale: f64,
    cfg: &TrainConfig,
) {
    for ((p, v), g) in param
        .data_mut()
        .iter_mut()
        .zip(velocity.data_mut())
        .zip(grad.data())
    {
        *v = cfg.momentum * *v + g * scale;
        *p -= cfg.learning_rate * *v;
    }
}

/// One prediction with its correctness label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: u64,
    pub presoftmax: Vec<f64>,
    pub predicted_class: usize,
    pub softmax_score: f64,
    pub true_class: usize,
    pub is_wrong: bool,
}

impl PredictionRecord {
    pub fn from_presoftmax(sample_id: u64, presoftmax: Vec<f64>, true_class: usize) -> Self {
        let predicted_class = crate::tensor::argmax(&presoftmax);
        let softmax_score = ops::softmax(&presoftmax)[predicted_class];
        Self {
            sample_id,
            presoftmax,
            predicted_class,
            softmax_score,
            true_class,
            is_wrong: predicted_class != true_class,
        }
    }

    /// Pre-softmax score at the predicted class.
    pub fn score(&self) -> f64 {
        self.presoftmax[self.predicted_class]
    }
}

pub fn predict(
    model: &Model,
    x: &Tensor,
    true_class: usize,
    sample_id: u64,
) -> Result<PredictionRecord> {
    let z = model.forward(x)?;
    Ok(PredictionRecord::from_presoftmax(
        sample_id,
        z.into_data(),
        true_class,
    ))
}

/// Fraction of `set` classified correctly.
pub fn evaluate(model: &Model, set: &Dataset) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("evaluation set is empty".into()));
    }
    let correct = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (x, y, id) = set.get(i);
            model
                .predict_class(x)
                .map(|p| (p == y) as usize)
                .map_err(|e| e.for_sample(id))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / set.len() as f64)
}
