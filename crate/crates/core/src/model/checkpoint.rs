//! Checkpoint files.
//!
//! Layout (little-endian): magic `CLCRCKPT`, `u32` version, the model spec
//! (input `C,H,W`, class count, then one tagged record per layer), the training
//! metadata, and finally per layer a presence byte followed by the weight and
//! bias tensors. See `codec` for scalar, string and tensor encodings.

use std::path::Path;

use super::{Activation, EpochStats, LayerParams, LayerSpec, Model, ModelSpec, PoolKind};
use crate::codec::{self, Reader, Writer};
use crate::Result;

const MAGIC: &[u8; 8] = b"CLCRCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainMeta {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub history: Vec<EpochStats>,
}

/// A trained model with the settings that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: TrainMeta,
}

fn put_activation(w: &mut Writer, a: Activation) {
    w.u8(match a {
        Activation::Relu => 0,
        Activation::Identity => 1,
    });
}

fn get_activation(r: &mut Reader) -> Result<Activation> {
    match r.u8()? {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Identity),
        t => Err(r.invalid(format!("unknown activation tag {t}"))),
    }
}

pub(crate) fn write_spec(w: &mut Writer, spec: &ModelSpec) {
    for &d in &spec.input_shape {
        w.usize(d);
    }
    w.usize(spec.num_classes);
    w.usize(spec.layers.len());
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Conv {
                out_channels,
                kernel,
                stride,
                padding,
                activation,
            } => {
                w.u8(0);
                w.usize(out_channels);
                w.usize(kernel);
                w.usize(stride);
                w.usize(padding);
                put_activation(w, activation);
            }
            LayerSpec::Pool { kind, size } => {
                w.u8(1);
                w.u8(match kind {
                    PoolKind::Max => 0,
                });
                w.usize(size);
            }
            LayerSpec::Dense { width, activation } => {
                w.u8(2);
                w.usize(width);
                put_activation(w, activation);
            }
        }
    }
}

pub(crate) fn read_spec(r: &mut Reader) -> Result<ModelSpec> {
    let input_shape = [r.usize()?, r.usize()?, r.usize()?];
    let num_classes = r.usize()?;
    let n = r.usize()?;
    let mut layers = Vec::new();
    for _ in 0..n {
        layers.push(match r.u8()? {
            0 => LayerSpec::Conv {
                out_channels: r.usize()?,
                kernel: r.usize()?,
                stride: r.usize()?,
                padding: r.usize()?,
                activation: get_activation(r)?,
            },
            1 => {
                let kind = match r.u8()? {
                    0 => PoolKind::Max,
                    t => return Err(r.invalid(format!("unknown pool kind {t}"))),
                };
                LayerSpec::Pool {
                    kind,
                    size: r.usize()?,
                }
            }
            2 => LayerSpec::Dense {
                width: r.usize()?,
                activation: get_activation(r)?,
            },
            t => return Err(r.invalid(format!("unknown layer tag {t}"))),
        });
    }
    let spec = ModelSpec {
        input_shape,
        num_classes,
        layers,
    };
    spec.validate().map_err(|e| r.invalid(e.to_string()))?;
    Ok(spec)
}

pub(crate) fn write_params(w: &mut Writer, model: &Model) {
    for p in model.params() {
        match p {
            Some(p) => {
                w.u8(1);
                w.tensor(&p.weight);
                w.tensor(&p.bias);
            }
            None => w.u8(0),
        }
    }
}

pub(crate) fn read_params(r: &mut Reader, spec: ModelSpec) -> Result<Model> {
    let mut params = Vec::with_capacity(spec.layers.len());
    for _ in 0..spec.layers.len() {
        params.push(match r.u8()? {
            0 => None,
            1 => Some(LayerParams {
                weight: r.tensor()?,
                bias: r.tensor()?,
            }),
            t => return Err(r.invalid(format!("bad parameter presence byte {t}"))),
        });
    }
    Model::new(spec, params).map_err(|e| r.invalid(e.to_string()))
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, CHECKPOINT_VERSION);
        write_spec(&mut w, self.model.spec());
        w.usize(self.meta.epochs);
        w.u64(self.meta.seed);
        w.f64(self.meta.learning_rate);
        w.f64(self.meta.momentum);
        w.usize(self.meta.batch_size);
        w.usize(self.meta.history.len());
        for h in &self.meta.history {
            w.usize(h.epoch);
            w.f64(h.loss);
            w.f64(h.accuracy);
        }
        write_params(&mut w, &self.model);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC, CHECKPOINT_VERSION, "checkpoint")?;
        let spec = read_spec(&mut r)?;
        let epochs = r.usize()?;
        let seed = r.u64()?;
        let learning_rate = r.f64()?;
        let momentum = r.f64()?;
        let batch_size = r.usize()?;
        let n = r.usize()?;
        let mut history = Vec::new();
        for _ in 0..n {
            history.push(EpochStats {
                epoch: r.usize()?,
                loss: r.f64()?,
                accuracy: r.f64()?,
            });
        }
        let model = read_params(&mut r, spec)?;
        r.finish()?;
        Ok(Self {
            model,
            meta: TrainMeta {
                epochs,
                seed,
                learning_rate,
                momentum,
                batch_size,
                history,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}
