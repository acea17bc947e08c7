//! Fully connected binary classifier: ReLU hidden layers, one logit output.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::roc::auroc;
use super::DetectorConfig;
use crate::tensor::ops::sigmoid;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `[outputs, inputs]`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    fn apply(&self, x: &[f64], relu: bool) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
                let z = self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                if relu {
                    z.max(0.0)
                } else {
                    z
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// He-uniform weights, zero biases.
    pub fn init(inputs: usize, hidden: &[usize], rng: &mut impl Rng) -> Self {
        let mut sizes = vec![inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|s| {
                let bound = (6.0 / s[0] as f64).sqrt();
                let mut d = Dense::zeros(s[0], s[1]);
                for w in &mut d.w {
                    *w = rng.random_range(-bound..bound);
                }
                d
            })
            .collect();
        Self { layers }
    }

    /// Input followed by every layer's output; the last holds the logit.
    fn trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let next = l.apply(acts.last().expect("input"), i < last);
            acts.push(next);
        }
        acts
    }

    pub fn logit(&self, x: &[f64]) -> f64 {
        self.trace(x).last().expect("output")[0]
    }

    /// Adds `d/dparams` of `seed * logit(x)` into `grads`.
    pub fn accumulate(&self, x: &[f64], seed: f64, grads: &mut [Dense]) {
        let acts = self.trace(x);
        let mut delta = vec![seed];
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let a = &acts[l];
            let g = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.b[o] += d;
                for (gw, &v) in g.w[o * layer.inputs..(o + 1) * layer.inputs]
                    .iter_mut()
                    .zip(a)
                {
                    *gw += d * v;
                }
            }
            if l == 0 {
                break;
            }
            // through W^T, then the ReLU that produced `a`
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (p, &w) in prev
                    .iter_mut()
                    .zip(&layer.w[o * layer.inputs..(o + 1) * layer.inputs])
                {
                    *p += d * w;
                }
            }
            for (p, &v) in prev.iter_mut().zip(a) {
                if v <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect()
    }
}

/// Progress of one fit.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct FitLog {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_auroc: f64,
}

/// Class-weighted binary cross-entropy with momentum SGD, keeping the epoch
/// with the best monitor AUROC and stopping after `patience` epochs without
/// improvement.
pub(crate) fn fit(
    x: &[Vec<f64>],
    y: &[bool],
    monitor: (&[Vec<f64>], &[bool]),
    hidden: &[usize],
    cfg: &DetectorConfig,
) -> Result<(Mlp, FitLog)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Mlp::init(x[0].len(), hidden, &mut rng);
    let n = x.len() as f64;
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    // inverse class frequency, scaled so the weights average to one
    let w_pos = n / (2.0 * n_pos);
    let w_neg = n / (2.0 * (n - n_pos));

    let mut velocity = net.zero_grads();
    let monitor_auroc = |net: &Mlp| -> Result<f64> {
        let s: Vec<f64> = monitor.0.iter().map(|v| net.logit(v)).collect();
        auroc(&s, monitor.1)
    };
    let mut best = (net.clone(), monitor_auroc(&net)?, 0usize);
    let mut since = 0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut epochs = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let mut grads = net.zero_grads();
            for &i in idx {
                let z = net.logit(&x[i]);
                let p = sigmoid(z);
                let (w, t) = if y[i] { (w_pos, 1.0) } else { (w_neg, 0.0) };
                // -log sigmoid(z) = softplus(-z), computed stably
                let nll = if y[i] { softplus(-z) } else { softplus(z) };
                loss += w * nll;
                net.accumulate(&x[i], w * (p - t), &mut grads);
            }
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch, loss });
            }
            let scale = 1.0 / idx.len() as f64;
            for (layer, (v, g)) in net.layers.iter_mut().zip(velocity.iter_mut().zip(&grads)) {
                for ((p, v), g) in layer.w.iter_mut().zip(&mut v.w).zip(&g.w) {
                    *v = cfg.momentum * *v + g * scale;
                    *p -= cfg.learning_rate * *v;
                }
                for ((p, v), g) in layer.b.iter_mut().zip(&mut v.b).zip(&g.b) {
                    *v = cfg.momentum * *v + g * scale;
                    *p -= cfg.learning_rate * *v;
                }
            }
        }
        let a = monitor_auroc(&net)?;
        log::debug!(
            "detector epoch {epoch}: loss {:.4}, monitor AUROC {a:.4}",
            loss / n
        );
        if a > best.1 {
            best = (net.clone(), a, epoch);
            since = 0;
        } else {
            since += 1;
            if since >= cfg.patience {
                break;
            }
        }
    }
    let (net, best_auroc, best_epoch) = best;
    Ok((
        net,
        FitLog {
            epochs,
            best_epoch,
            best_auroc,
        },
    ))
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}
