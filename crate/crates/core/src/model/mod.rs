//! Small sequential CNN classifiers: architecture description, seeded
//! initialization, plain and recorded forward passes, training and
//! checkpoint serialization.

mod checkpoint;
mod train;

pub use checkpoint::{Checkpoint, TrainMeta};
pub use train::{evaluate, predict, train, EpochStats, PredictionRecord, TrainConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::tensor::{ops, NodeId, Tape, Tensor};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolKind {
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        out_channels: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: usize,
        #[serde(default = "relu")]
        activation: Activation,
    },
    Pool {
        #[serde(default = "max_pool")]
        kind: PoolKind,
        size: usize,
    },
    Dense {
        width: usize,
        #[serde(default = "identity")]
        activation: Activation,
    },
}

fn one() -> usize {
    1
}
fn relu() -> Activation {
    Activation::Relu
}
fn identity() -> Activation {
    Activation::Identity
}
fn max_pool() -> PoolKind {
    PoolKind::Max
}

/// Layer stack of a classifier whose output is the pre-softmax score vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_shape: [usize; 3],
    pub num_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// Two 3×3 convolutions (16 then 32 maps, ReLU, 2×2 max-pool after each)
    /// followed by a dense layer producing class scores.
    pub fn desk_default(input_shape: [usize; 3], num_classes: usize) -> Self {
        let conv = |out_channels| LayerSpec::Conv {
            out_channels,
            kernel: 3,
            stride: 1,
            padding: 1,
            activation: Activation::Relu,
        };
        let pool = LayerSpec::Pool {
            kind: PoolKind::Max,
            size: 2,
        };
        Self {
            input_shape,
            num_classes,
            layers: vec![
                conv(16),
                pool.clone(),
                conv(32),
                pool,
                LayerSpec::Dense {
                    width: num_classes,
                    activation: Activation::Identity,
                },
            ],
        }
    }

    /// Output shape of every layer, validating the stack along the way.
    pub fn layer_shapes(&self) -> Result<Vec<Vec<usize>>> {
        let bad = |msg: String| Error::InvalidArgument(format!("model spec: {msg}"));
        if self.input_shape.contains(&0) {
            return Err(bad(format!(
                "input shape {:?} has a zero extent",
                self.input_shape
            )));
        }
        if !self
            .layers
            .iter()
            .any(|l| matches!(l, LayerSpec::Conv { .. }))
        {
            return Err(bad("at least one convolutional layer is required".into()));
        }
        match self.layers.last() {
            Some(LayerSpec::Dense { width, activation })
                if *width == self.num_classes && *activation == Activation::Identity => {}
            _ => {
                return Err(bad(format!(
                    "last layer must be a dense layer of width {} without activation",
                    self.num_classes
                )))
            }
        }
        let mut shape = self.input_shape.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let &[_, h, w] = shape.as_slice() else {
                        return Err(bad(format!("layer {i}: convolution after a dense layer")));
                    };
                    if out_channels == 0
                        || kernel == 0
                        || stride == 0
                        || kernel > h + 2 * padding
                        || kernel > w + 2 * padding
                    {
                        return Err(bad(format!(
                            "layer {i}: invalid convolution for input {shape:?}"
                        )));
                    }
                    vec![
                        out_channels,
                        ops::conv_out_extent(h, kernel, stride, padding),
                        ops::conv_out_extent(w, kernel, stride, padding),
                    ]
                }
                LayerSpec::Pool { size, .. } => {
                    let &[c, h, w] = shape.as_slice() else {
                        return Err(bad(format!("layer {i}: pooling after a dense layer")));
                    };
                    if size == 0 || size > h || size > w {
                        return Err(bad(format!(
                            "layer {i}: pool {size} does not fit {shape:?}"
                        )));
                    }
                    vec![c, h / size, w / size]
                }
                LayerSpec::Dense { width, .. } => {
                    if width == 0 {
                        return Err(bad(format!("layer {i}: zero-width dense layer")));
                    }
                    vec![width]
                }
            };
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        self.layer_shapes().map(|_| ())
    }

    /// `conv1`, `pool1`, `conv2`, ... numbered per layer kind.
    pub fn layer_name(&self, index: usize) -> String {
        let kind = |l: &LayerSpec| match l {
            LayerSpec::Conv { .. } => "conv",
            LayerSpec::Pool { .. } => "pool",
            LayerSpec::Dense { .. } => "dense",
        };
        let k = kind(&self.layers[index]);
        let n = self.layers[..=index]
            .iter()
            .filter(|l| kind(l) == k)
            .count();
        format!("{k}{n}")
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        (0..self.layers.len())
            .find(|&i| self.layer_name(i) == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no layer named `{name}`")))
    }

    /// Index of a convolutional layer by name.
    pub fn conv_layer_index(&self, name: &str) -> Result<usize> {
        let i = self.layer_index(name)?;
        match self.layers[i] {
            LayerSpec::Conv { .. } => Ok(i),
            _ => Err(Error::InvalidArgument(format!(
                "layer `{name}` is not convolutional"
            ))),
        }
    }

    pub fn conv_layer_indices(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&i| matches!(self.layers[i], LayerSpec::Conv { .. }))
            .collect()
    }

    pub fn last_conv_layer(&self) -> String {
        let i = *self
            .conv_layer_indices()
            .last()
            .expect("validated spec has a conv layer");
        self.layer_name(i)
    }

    /// Weight and bias shapes for each parametric layer.
    fn param_shapes(&self) -> Result<Vec<Option<(Vec<usize>, Vec<usize>)>>> {
        let shapes = self.layer_shapes()?;
        let mut input = self.input_shape.to_vec();
        let mut out = Vec::with_capacity(self.layers.len());
        for (layer, shape) in self.layers.iter().zip(&shapes) {
            out.push(match *layer {
                LayerSpec::Conv {
                    out_channels,
                    kernel,
                    ..
                } => Some((
                    vec![out_channels, input[0], kernel, kernel],
                    vec![out_channels],
                )),
                LayerSpec::Dense { width, .. } => {
                    Some((vec![width, input.iter().product()], vec![width]))
                }
                LayerSpec::Pool { .. } => None,
            });
            input = shape.clone();
        }
        Ok(out)
    }
}

/// Weight tensor and bias vector of one convolutional or dense layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

/// A classifier: architecture plus one optional parameter block per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<Option<LayerParams>>,
}

/// Tape of one recorded forward pass with the handles needed for attribution
/// and training.
#[derive(Clone, Debug)]
pub struct ForwardRecord {
    pub tape: Tape,
    pub input: NodeId,
    /// Per layer, the `(weight, bias)` parameter nodes.
    pub params: Vec<Option<(NodeId, NodeId)>>,
    /// Post-activation output of every convolutional layer, by layer name.
    pub activations: Vec<(String, NodeId)>,
    pub output: NodeId,
}

impl ForwardRecord {
    pub fn presoftmax(&self) -> &Tensor {
        self.tape.value(self.output)
    }

    pub fn activation_node(&self, layer: &str) -> Option<NodeId> {
        self.activations
            .iter()
            .find(|(n, _)| n == layer)
            .map(|&(_, id)| id)
    }

    pub fn activation(&self, layer: &str) -> Option<&Tensor> {
        self.activation_node(layer).map(|id| self.tape.value(id))
    }
}

impl Model {
    pub fn new(spec: ModelSpec, params: Vec<Option<LayerParams>>) -> Result<Self> {
        let shapes = spec.param_shapes()?;
        if shapes.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "{} parameter slots for {} layers",
                params.len(),
                shapes.len()
            )));
        }
        for (i, (want, have)) in shapes.iter().zip(&params).enumerate() {
            let ok = match (want, have) {
                (None, None) => true,
                (Some((w, b)), Some(p)) => {
                    p.weight.shape() == w.as_slice() && p.bias.shape() == b.as_slice()
                }
                _ => false,
            };
            if !ok {
                return Err(Error::shape(
                    "Model::new",
                    format!("layer {i} parameters do not match {want:?}"),
                ));
            }
        }
        Ok(Self { spec, params })
    }

    /// Seeded uniform initialization scaled by fan-in, `U(-b, b)` with
    /// `b = sqrt(6 / fan_in)`; biases start at zero.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .param_shapes()?
            .into_iter()
            .map(|slot| {
                slot.map(|(w, b)| {
                    let fan_in: usize = w[1..].iter().product();
                    let bound = (6.0 / fan_in as f64).sqrt();
                    LayerParams {
                        weight: Tensor::from_fn(&w, |_| rng.random_range(-bound..bound)),
                        bias: Tensor::zeros(&b),
                    }
                })
            })
            .collect();
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Option<LayerParams>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Option<LayerParams>] {
        &mut self.params
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn param_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.spec.input_shape {
            return Err(Error::shape(
                "forward",
                format!(
                    "input {:?}, model expects {:?}",
                    x.shape(),
                    self.spec.input_shape
                ),
            ));
        }
        Ok(())
    }

    /// Convolution plus bias of conv layer `i`, before its activation.
    pub fn conv_preactivation(&self, i: usize, x: &Tensor) -> Result<Tensor> {
        let LayerSpec::Conv {
            stride, padding, ..
        } = self.spec.layers[i]
        else {
            return Err(Error::InvalidArgument(format!(
                "layer {i} is not convolutional"
            )));
        };
        let p = self.params[i].as_ref().expect("conv layer has parameters");
        ops::add_channel_bias(&ops::conv2d(x, &p.weight, stride, padding)?, &p.bias)
    }

    pub fn activate(&self, i: usize, z: Tensor) -> Tensor {
        match self.spec.layers[i] {
            LayerSpec::Conv {
                activation: Activation::Relu,
                ..
            }
            | LayerSpec::Dense {
                activation: Activation::Relu,
                ..
            } => ops::relu(&z),
            _ => z,
        }
    }

    /// Applies layer `i` to its input.
    pub fn apply_layer(&self, i: usize, x: &Tensor) -> Result<Tensor> {
        match self.spec.layers[i] {
            LayerSpec::Conv { .. } => Ok(self.activate(i, self.conv_preactivation(i, x)?)),
            LayerSpec::Pool { size, .. } => Ok(ops::maxpool2d(x, size)?.0),
            LayerSpec::Dense { .. } => {
                let p = self.params[i].as_ref().expect("dense layer has parameters");
                let z = ops::matvec(&p.weight, x)?.add(&p.bias)?;
                Ok(self.activate(i, z))
            }
        }
    }

    /// Runs layers `start..` on `x`, the input of layer `start`.
    pub fn run_from(&self, start: usize, x: Tensor) -> Result<Tensor> {
        (start..self.spec.layers.len()).try_fold(x, |acc, i| self.apply_layer(i, &acc))
    }

    /// Pre-softmax scores without recording.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        self.run_from(0, x.clone())
    }

    pub fn predict_class(&self, x: &Tensor) -> Result<usize> {
        Ok(self.forward(x)?.argmax())
    }

    /// Forward pass recorded on a tape, keeping every conv layer's activation.
    pub fn forward_record(&self, x: &Tensor) -> Result<ForwardRecord> {
        self.check_input(x)?;
        let mut tape = Tape::new();
        let input = tape.input(x.clone());
        let mut cur = input;
        let mut params = Vec::with_capacity(self.params.len());
        let mut activations = Vec::new();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let slot = self.params[i]
                .as_ref()
                .map(|p| (tape.param(p.weight.clone()), tape.param(p.bias.clone())));
            params.push(slot);
            cur = match *layer {
                LayerSpec::Conv {
                    stride,
                    padding,
                    activation,
                    ..
                } => {
                    let (w, b) = slot.expect("conv params");
                    let z = tape.conv2d(cur, w, stride, padding)?;
                    let z = tape.channel_bias(z, b)?;
                    let a = match activation {
                        Activation::Relu => tape.relu(z)?,
                        Activation::Identity => z,
                    };
                    activations.push((self.spec.layer_name(i), a));
                    a
                }
                LayerSpec::Pool { size, .. } => tape.maxpool2d(cur, size)?,
                LayerSpec::Dense { activation, .. } => {
                    let (w, b) = slot.expect("dense params");
                    let flat = if tape.value(cur).rank() > 1 {
                        tape.flatten(cur)?
                    } else {
                        cur
                    };
                    let z = tape.matvec(w, flat)?;
                    let z = tape.bias(z, b)?;
                    match activation {
                        Activation::Relu => tape.relu(z)?,
                        Activation::Identity => z,
                    }
                }
            };
        }
        Ok(ForwardRecord {
            tape,
            input,
            params,
            activations,
            output: cur,
        })
    }
}
