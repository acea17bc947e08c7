//! Path attributions along the straight line from a baseline input to the
//! input: integrated gradients over pixels, neuron conductance at a
//! convolutional layer (a slow per-pixel form and a fast form that only
//! differentiates down to the layer), and feature-map conductance, the spatial
//! sum of neuron conductances within one channel.
//!
//! All forms use an `n`-step right-endpoint Riemann sum with interpolation
//! points `x_k = x' + (k/n)(x - x')`, `x_0 = x'` and `x_n = x` exactly.

use std::path::Path;

use crate::data::Dataset;
use crate::model::{Model, PredictionRecord};
use crate::table::{self, Rows};
use crate::tensor::{GradScope, Tensor};
use crate::{Error, Result};
use rayon::prelude::*;

/// Straight-line integration path from `baseline` to the input, discretized in
/// `steps` segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSpec {
    baseline: Tensor,
    steps: usize,
}

impl PathSpec {
    pub fn new(baseline: Tensor, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument(
                "path needs at least one step".into(),
            ));
        }
        Ok(Self { baseline, steps })
    }

    /// All-zero baseline.
    pub fn zero(shape: &[usize], steps: usize) -> Result<Self> {
        Self::new(Tensor::zeros(shape), steps)
    }

    pub fn baseline(&self) -> &Tensor {
        &self.baseline
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.baseline.shape() {
            return Err(Error::shape(
                "path",
                format!(
                    "input {:?} vs baseline {:?}",
                    x.shape(),
                    self.baseline.shape()
                ),
            ));
        }
        Ok(())
    }

    /// Interpolation point `k` of `0..=steps`.
    pub fn point(&self, x: &Tensor, k: usize) -> Tensor {
        if k == 0 {
            self.baseline.clone()
        } else if k == self.steps {
            x.clone()
        } else {
            self.baseline
                .lerp(x, k as f64 / self.steps as f64)
                .expect("shapes checked")
        }
    }
}

fn one_hot(len: usize, index: usize) -> Result<Tensor> {
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    let mut t = Tensor::zeros(&[len]);
    t.data_mut()[index] = 1.0;
    Ok(t)
}

/// Per-pixel integrated gradients of the class-`class` pre-softmax score.
pub fn integrated_gradients(
    model: &Model,
    x: &Tensor,
    path: &PathSpec,
    class: usize,
) -> Result<Tensor> {
    path.check(x)?;
    let scope = GradScope {
        stop_at: None,
        params: false,
        inputs: true,
    };
    let mut total = Tensor::zeros(x.shape());
    for k in 1..=path.steps {
        let rec = model.forward_record(&path.point(x, k))?;
        let seed = one_hot(model.num_classes(), class)?;
        let g = rec.tape.backward_with(rec.output, seed, scope)?;
        total.add_assign(g.get(rec.input).expect("input gradient"))?;
    }
    let delta = x.sub(&path.baseline)?;
    delta.zip_map(&total, |d, g| d * g / path.steps as f64)
}

/// Neuron conductance together with the scores at both path ends.
#[derive(Clone, Debug)]
pub struct Conductance {
    /// `[C, H, W]` conductance of every neuron of the layer.
    pub neurons: Tensor,
    /// `f_c(x)`.
    pub score: f64,
    /// `f_c(x')`.
    pub baseline_score: f64,
}

impl Conductance {
    pub fn feature_maps(&self) -> Vec<f64> {
        feature_map_conductance(&self.neurons).expect("conductance is [C,H,W]")
    }

    /// `sum(conductance) - (f_c(x) - f_c(x'))`.
    pub fn residual(&self) -> f64 {
        self.neurons.sum() - (self.score - self.baseline_score)
    }
}

/// Fast conductance: `sum_k df_c/df_y(x_k) * (f_y(x_k) - f_y(x_{k-1}))` with the
/// gradient taken from the tape only down to the layer's activation.
pub fn conductance(
    model: &Model,
    x: &Tensor,
    path: &PathSpec,
    class: usize,
    layer: &str,
) -> Result<Conductance> {
    path.check(x)?;
    model.spec().conv_layer_index(layer)?;
    let seed = one_hot(model.num_classes(), class)?;

    let start = model.forward_record(&path.point(x, 0))?;
    let baseline_score = start.presoftmax().data()[class];
    let mut prev = start
        .activation(layer)
        .expect("conv activation recorded")
        .clone();
    let mut neurons = Tensor::zeros(prev.shape());
    let mut score = baseline_score;
    for k in 1..=path.steps {
        let rec = model.forward_record(&path.point(x, k))?;
        let node = rec
            .activation_node(layer)
            .expect("conv activation recorded");
        let mut g = rec
            .tape
            .backward_with(rec.output, seed.clone(), GradScope::down_to(node))?;
        let grad = g.take(node).expect("layer gradient");
        let act = rec.tape.value(node);
        for ((c, &gv), (&a, &p)) in neurons
            .data_mut()
            .iter_mut()
            .zip(grad.data())
            .zip(act.data().iter().zip(prev.data()))
        {
            *c += gv * (a - p);
        }
        prev = act.clone();
        score = rec.presoftmax().data()[class];
    }
    Ok(Conductance {
        neurons,
        score,
        baseline_score,
    })
}

pub fn neuron_conductance_fast(
    model: &Model,
    x: &Tensor,
    path: &PathSpec,
    class: usize,
    layer: &str,
) -> Result<Tensor> {
    Ok(conductance(model, x, path, class, layer)?.neurons)
}

/// Slow conductance from the per-pixel definition:
/// `sum_i (x_i - x'_i) * (1/n) sum_k df_c/df_y(x_k) * df_y/dx_i(x_k)`.
///
/// Each neuron's input gradient needs its own backward sweep, so this is only
/// practical on tiny models; it exists as an independent check of the fast form.
pub fn neuron_conductance_direct(
    model: &Model,
    x: &Tensor,
    path: &PathSpec,
    class: usize,
    layer: &str,
) -> Result<Tensor> {
    path.check(x)?;
    model.spec().conv_layer_index(layer)?;
    let seed = one_hot(model.num_classes(), class)?;
    let delta = x.sub(&path.baseline)?;
    let input_scope = GradScope {
        stop_at: None,
        params: false,
        inputs: true,
    };

    let mut out: Option<Tensor> = None;
    for k in 1..=path.steps {
        let rec = model.forward_record(&path.point(x, k))?;
        let node = rec
            .activation_node(layer)
            .expect("conv activation recorded");
        let shape = rec.tape.value(node).shape().to_vec();
        let acc = out.get_or_insert_with(|| Tensor::zeros(&shape));
        let mut g = rec
            .tape
            .backward_with(rec.output, seed.clone(), GradScope::down_to(node))?;
        let df_dy = g.take(node).expect("layer gradient");

        for (j, &gy) in df_dy.data().iter().enumerate() {
            let mut unit = Tensor::zeros(&shape);
            unit.data_mut()[j] = 1.0;
            let gi = rec.tape.backward_with(node, unit, input_scope)?;
            let dy_dx = gi.get(rec.input).expect("input gradient");
            let mut pixel_sum = 0.0;
            for (d, dx) in delta.data().iter().zip(dy_dx.data()) {
                pixel_sum += d * gy * dx;
            }
            acc.data_mut()[j] += pixel_sum / path.steps as f64;
        }
    }
    Ok(out.expect("at least one step"))
}

/// Sums a `[C, H, W]` neuron conductance tensor over space, one value per channel.
pub fn feature_map_conductance(neurons: &Tensor) -> Result<Vec<f64>> {
    let &[c, h, w] = neurons.shape() else {
        return Err(Error::shape(
            "feature_map_conductance",
            format!("expected [C,H,W], got {:?}", neurons.shape()),
        ));
    };
    Ok(neurons
        .data()
        .chunks_exact(h * w)
        .take(c)
        .map(|ch| ch.iter().sum())
        .collect())
}

/// `sum_y Cond_y - (f_c(x) - f_c(x'))` using the fast form.
pub fn completeness_residual(
    model: &Model,
    x: &Tensor,
    path: &PathSpec,
    class: usize,
    layer: &str,
) -> Result<f64> {
    Ok(conductance(model, x, path, class, layer)?.residual())
}

/// Feature-map conductances of one prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceRow {
    pub sample_id: u64,
    pub true_class: usize,
    pub pred_class: usize,
    pub is_wrong: bool,
    pub values: Vec<f64>,
}

/// Per-sample feature-map conductance vectors at one layer, in dataset order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceMatrix {
    pub layer: String,
    pub rows: Vec<ConductanceRow>,
}

impl ConductanceMatrix {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, |r| r.values.len())
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.is_wrong).collect()
    }

    /// Columns `sample_id,true_class,pred_class,is_wrong,fm_0,...,fm_{C-1}`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut header: Vec<String> = ["sample_id", "true_class", "pred_class", "is_wrong"]
            .map(String::from)
            .to_vec();
        header.extend((0..self.width()).map(|i| format!("fm_{i}")));
        table::write_csv(
            path.as_ref(),
            &header,
            self.rows.iter().map(|r| {
                [
                    r.sample_id.to_string(),
                    r.true_class.to_string(),
                    r.pred_class.to_string(),
                    table::flag(r.is_wrong),
                ]
                .into_iter()
                .chain(r.values.iter().map(f64::to_string))
            }),
        )
    }

    pub fn read_csv(path: impl AsRef<Path>, layer: &str) -> Result<Self> {
        let t = Rows::read(path.as_ref())?;
        t.expect_header(&["sample_id", "true_class", "pred_class", "is_wrong"])?;
        let width = t.header.len() - 4;
        let rows = (0..t.records.len())
            .map(|i| {
                Ok(ConductanceRow {
                    sample_id: t.parse(i, 0)?,
                    true_class: t.parse(i, 1)?,
                    pred_class: t.parse(i, 2)?,
                    is_wrong: t.parse_bool(i, 3)?,
                    values: (0..width)
                        .map(|c| t.parse(i, 4 + c))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            layer: layer.to_owned(),
            rows,
        })
    }
}

/// Conductance vector of every sample of `set` w.r.t. its predicted class.
/// `baseline` defaults to the all-zero image.
pub fn conductance_dataset(
    model: &Model,
    set: &Dataset,
    layer: &str,
    steps: usize,
    baseline: Option<&Tensor>,
) -> Result<ConductanceMatrix> {
    if set.is_empty() {
        return Err(Error::InvalidArgument(
            "conductance dataset needs samples".into(),
        ));
    }
    model.spec().conv_layer_index(layer)?;
    let path = match baseline {
        Some(b) => PathSpec::new(b.clone(), steps)?,
        None => PathSpec::zero(&model.spec().input_shape, steps)?,
    };
    let rows = (0..set.len())
        .into_par_iter()
        .map(|i| {
            let (x, y, id) = set.get(i);
            let run = || -> Result<ConductanceRow> {
                let pred = PredictionRecord::from_presoftmax(id, model.forward(x)?.into_data(), y);
                let cond = conductance(model, x, &path, pred.predicted_class, layer)?;
                Ok(ConductanceRow {
                    sample_id: id,
                    true_class: y,
                    pred_class: pred.predicted_class,
                    is_wrong: pred.is_wrong,
                    values: cond.feature_maps(),
                })
            };
            run().map_err(|e| e.for_sample(id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConductanceMatrix {
        layer: layer.to_owned(),
        rows,
    })
}
