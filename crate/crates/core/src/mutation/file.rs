//! Mutant delta files.
//!
//! Layout (little-endian): magic `CLCRDLTA`, `u32` version, checkpoint path
//! string, config (operator `u8`, rate `f64`, count `u32`, seed `u64`, floor
//! `f64`, GF scale `f64`), original accuracy `f64`, attempts `u32`, mutant
//! count `u32`, then per mutant: operator `u8`, rate `f64`, seed `u64`,
//! accuracy presence `u8` and `f64`, delta count `u32`, and per delta layer
//! `u32`, kernel `u32` and the new kernel values as a length-prefixed `f64`
//! list.

use std::path::Path;

use super::{KernelDelta, Mutant, MutantSet, MutationConfig, Operator};
use crate::codec::{self, Reader, Writer};
use crate::Result;

const MAGIC: &[u8; 8] = b"CLCRDLTA";
pub const DELTA_VERSION: u32 = 1;

fn get_operator(r: &mut Reader) -> Result<Operator> {
    let code = r.u8()?;
    Operator::from_code(code).ok_or_else(|| r.invalid(format!("unknown operator code {code}")))
}

impl MutantSet {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC, DELTA_VERSION);
        w.str(&self.checkpoint);
        let c = &self.config;
        w.u8(c.operator.code());
        w.f64(c.rate);
        w.usize(c.count);
        w.u64(c.seed);
        w.f64(c.validity_floor);
        w.f64(c.gf_scale);
        w.f64(self.original_accuracy);
        w.usize(self.attempts);
        w.usize(self.mutants.len());
        for m in &self.mutants {
            w.u8(m.operator.code());
            w.f64(m.rate);
            w.u64(m.seed);
            w.u8(m.val_accuracy.is_some() as u8);
            w.f64(m.val_accuracy.unwrap_or(0.0));
            w.usize(m.deltas.len());
            for d in &m.deltas {
                w.usize(d.layer);
                w.usize(d.kernel);
                w.f64s(&d.values);
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC, DELTA_VERSION, "mutant delta file")?;
        let checkpoint = r.str()?;
        let config = MutationConfig {
            operator: get_operator(&mut r)?,
            rate: r.f64()?,
            count: r.usize()?,
            seed: r.u64()?,
            validity_floor: r.f64()?,
            gf_scale: r.f64()?,
        };
        let original_accuracy = r.f64()?;
        let attempts = r.usize()?;
        let n = r.usize()?;
        let mut mutants = Vec::new();
        for _ in 0..n {
            let operator = get_operator(&mut r)?;
            let rate = r.f64()?;
            let seed = r.u64()?;
            let has_acc = r.u8()? != 0;
            let acc = r.f64()?;
            let k = r.usize()?;
            let mut deltas = Vec::new();
            for _ in 0..k {
                deltas.push(KernelDelta {
                    layer: r.usize()?,
                    kernel: r.usize()?,
                    values: r.f64s()?,
                });
            }
            mutants.push(Mutant {
                operator,
                rate,
                seed,
                deltas,
                val_accuracy: has_acc.then_some(acc),
            });
        }
        r.finish()?;
        Ok(Self {
            checkpoint,
            config,
            original_accuracy,
            attempts,
            mutants,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        codec::write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&codec::read_file(path.as_ref())?)
    }
}
