//! Detector files.
//!
//! Layout (little-endian): magic `CLCRDTCT`, `u32` version, kind `u8`
//! (0 mlp_2x200, 1 mlp_2x10, 2 lda, 3 qda), normalizer means and stds as
//! length-prefixed `f64` lists, monitor AUROC presence `u8` and `f64`, epochs
//! `u32`, then the model. MLPs store a layer count and per layer input width,
//! output width, weights and biases. LDA and QDA store the two class means,
//! the covariance (LDA) or both covariances (QDA) row-major, and two priors.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::gaussian::{Lda, Qda};
use super::mlp::{Dense, Mlp};
use super::{Detector, DetectorKind, Inner, Normalizer};
use crate::codec::{self, Reader, Writer};
use crate::Result;

const MAGIC: &[u8; 8] = b"CLCRDTCT";
pub const DETECTOR_VERSION: u32 = 1;

const KINDS: [DetectorKind; 4] = [
    DetectorKind::Mlp2x200,
    DetectorKind::Mlp2x10,
    DetectorKind::Lda,
    DetectorKind::Qda,
];

fn put_matrix(w: &mut Writer, m: &DMatrix<f64>) {
    w.f64s(m.transpose().as_slice());
}

fn get_matrix(r: &mut Reader, d: usize) -> Result<DMatrix<f64>> {
    let v = r.f64s()?;
    if v.len() != d * d {
        return Err(r.invalid(format!(
            "matrix has {} entries, expected {}",
            v.len(),
            d * d
        )));
    }
    Ok(DMatrix::from_row_slice(d, d, &v))
}

fn get_vector(r: &mut Reader, d: usize) -> Result<DVector<f64>> {
    let v = r.f64s()?;
    if v.len() != d {
        return Err(r.invalid(format!("vector has {} entries, expected {d}", v.len())));
    }
    Ok(DVector::from_vec(v))
}

impl Detector {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, DETECTOR_VERSION);
        w.u8(KINDS
            .iter()
            .position(|&k| k == self.kind)
            .expect("known kind") as u8);
        w.f64s(&self.normalizer.mean);
        w.f64s(&self.normalizer.std);
        w.u8(self.monitor_auroc.is_some() as u8);
        w.f64(self.monitor_auroc.unwrap_or(0.0));
        w.usize(self.epochs);
        match &self.inner {
            Inner::Mlp(net) => {
                w.usize(net.layers.len());
                for l in &net.layers {
                    w.usize(l.inputs);
                    w.usize(l.outputs);
                    w.f64s(&l.w);
                    w.f64s(&l.b);
                }
            }
            Inner::Lda(m) => {
                w.f64s(m.means[0].as_slice());
                w.f64s(m.means[1].as_slice());
                put_matrix(&mut w, &m.cov);
                w.f64(m.priors[0]);
                w.f64(m.priors[1]);
            }
            Inner::Qda(m) => {
                w.f64s(m.means[0].as_slice());
                w.f64s(m.means[1].as_slice());
                put_matrix(&mut w, &m.covs[0]);
                put_matrix(&mut w, &m.covs[1]);
                w.f64(m.priors[0]);
                w.f64(m.priors[1]);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC, DETECTOR_VERSION, "detector")?;
        let code = r.u8()?;
        let kind = *KINDS
            .get(code as usize)
            .ok_or_else(|| r.invalid(format!("unknown detector kind {code}")))?;
        let mean = r.f64s()?;
        let std = r.f64s()?;
        if mean.len() != std.len() || mean.is_empty() {
            return Err(r.invalid("normalizer lengths disagree"));
        }
        let d = mean.len();
        let has_auroc = r.u8()? != 0;
        let auroc = r.f64()?;
        let epochs = r.usize()?;
        let inner = match kind {
            DetectorKind::Mlp2x200 | DetectorKind::Mlp2x10 => {
                let n = r.usize()?;
                let mut layers = Vec::new();
                let mut width = d;
                for _ in 0..n {
                    let inputs = r.usize()?;
                    let outputs = r.usize()?;
                    let w = r.f64s()?;
                    let b = r.f64s()?;
                    if inputs != width || w.len() != inputs * outputs || b.len() != outputs {
                        return Err(r.invalid("MLP layer shapes are inconsistent"));
                    }
                    width = outputs;
                    layers.push(Dense {
                        inputs,
                        outputs,
                        w,
                        b,
                    });
                }
                if width != 1 {
                    return Err(r.invalid("MLP must end in a single output"));
                }
                Inner::Mlp(Mlp { layers })
            }
            DetectorKind::Lda => {
                let means = [get_vector(&mut r, d)?, get_vector(&mut r, d)?];
                let cov = get_matrix(&mut r, d)?;
                let priors = [r.f64()?, r.f64()?];
                Inner::Lda(
                    Lda::from_parts(means, cov, priors).map_err(|e| r.invalid(e.to_string()))?,
                )
            }
            DetectorKind::Qda => {
                let means = [get_vector(&mut r, d)?, get_vector(&mut r, d)?];
                let covs = [get_matrix(&mut r, d)?, get_matrix(&mut r, d)?];
                let priors = [r.f64()?, r.f64()?];
                Inner::Qda(
                    Qda::from_parts(means, covs, priors).map_err(|e| r.invalid(e.to_string()))?,
                )
            }
        };
        r.finish()?;
        Ok(Self {
            kind,
            normalizer: Normalizer { mean, std },
            inner,
            monitor_auroc: has_auroc.then_some(auroc),
            epochs,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}
