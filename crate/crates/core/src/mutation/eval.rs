//! Batched mutant inference.
//!
//! For each sample the original model's input and pre-activation at every conv
//! layer a mutant first touches are cached. A mutant then starts from the cached
//! pre-activation, adds `correlate(input, new - old)` for each of its changed
//! kernels in that layer, and runs the remaining layers with its own weights.

use rayon::prelude::*;

use super::Mutant;
use crate::data::Dataset;
use crate::model::{LayerSpec, Model};
use crate::tensor::ops::{correlate_plane_acc, ConvGeometry};
use crate::tensor::{argmax, Tensor};
use crate::Result;

/// Samples per cache batch; bounds memory on large sets.
const CHUNK: usize = 256;

/// Predicted classes of the original model and of every mutant, in sample order.
#[derive(Clone, Debug, PartialEq)]
pub struct MutantPredictions {
    pub original: Vec<usize>,
    /// `mutants[m][s]`.
    pub mutants: Vec<Vec<usize>>,
}

impl MutantPredictions {
    pub fn accuracy_original(&self, labels: &[usize]) -> f64 {
        accuracy(&self.original, labels)
    }

    pub fn accuracy(&self, mutant: usize, labels: &[usize]) -> f64 {
        accuracy(&self.mutants[mutant], labels)
    }
}

fn accuracy(preds: &[usize], labels: &[usize]) -> f64 {
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / preds.len().max(1) as f64
}

struct Prepared {
    model: Model,
    start: Option<usize>,
    /// `(kernel index, new - old)` for the kernels of the start layer.
    diffs: Vec<(usize, Vec<f64>)>,
}

fn prepare(model: &Model, mutant: &Mutant) -> Result<Prepared> {
    let mutated = mutant.apply(model)?;
    let start = mutant.first_layer();
    let diffs = match start {
        Some(l) => {
            let w = model.params()[l]
                .as_ref()
                .expect("conv params")
                .weight
                .data();
            mutant
                .deltas
                .iter()
                .filter(|d| d.layer == l)
                .map(|d| {
                    let size = d.values.len();
                    let old = &w[d.kernel * size..(d.kernel + 1) * size];
                    (
                        d.kernel,
                        d.values.iter().zip(old).map(|(n, o)| n - o).collect(),
                    )
                })
                .collect()
        }
        None => Vec::new(),
    };
    Ok(Prepared {
        model: mutated,
        start,
        diffs,
    })
}

/// Original logits plus the `(input, pre-activation)` pairs at `layers`.
fn trace(
    model: &Model,
    x: &Tensor,
    layers: &[bool],
) -> Result<(Vec<f64>, Vec<Option<(Tensor, Tensor)>>)> {
    let mut cache = vec![None; layers.len()];
    let mut cur = x.clone();
    for (i, layer) in model.spec().layers.iter().enumerate() {
        cur = if layers[i] {
            let z = model.conv_preactivation(i, &cur)?;
            let a = model.activate(i, z.clone());
            cache[i] = Some((cur, z));
            a
        } else {
            model.apply_layer(i, &cur)?
        };
        debug_assert!(!layers[i] || matches!(layer, LayerSpec::Conv { .. }));
    }
    Ok((cur.into_data(), cache))
}

/// The mutant's pre-activation at its first touched layer, from the cache.
fn patched_preactivation(
    p: &Prepared,
    l: usize,
    cache: &[Option<(Tensor, Tensor)>],
) -> Result<Tensor> {
    let (input, pre) = cache[l].as_ref().expect("layer cached");
    let LayerSpec::Conv {
        stride, padding, ..
    } = p.model.spec().layers[l]
    else {
        unreachable!("mutants only touch conv layers")
    };
    let w = &p.model.params()[l].as_ref().expect("conv params").weight;
    let g = ConvGeometry::new(input.shape(), w.shape(), stride, padding)?;
    let mut z = pre.clone();
    let plane_in = g.in_h * g.in_w;
    let plane_out = g.out_h * g.out_w;
    for (k, diff) in &p.diffs {
        let (o, c) = (k / g.in_channels, k % g.in_channels);
        correlate_plane_acc(
            &mut z.data_mut()[o * plane_out..(o + 1) * plane_out],
            &input.data()[c * plane_in..(c + 1) * plane_in],
            diff,
            &g,
        );
    }
    Ok(z)
}

fn run_mutant(p: &Prepared, original: usize, cache: &[Option<(Tensor, Tensor)>]) -> Result<usize> {
    let Some(l) = p.start else {
        return Ok(original);
    };
    let z = patched_preactivation(p, l, cache)?;
    let out = p.model.run_from(l + 1, p.model.activate(l, z))?;
    Ok(argmax(out.data()))
}

/// Predictions of `model` and of each mutant on every sample of `set`.
pub fn predict_mutants(
    model: &Model,
    mutants: &[Mutant],
    set: &Dataset,
) -> Result<MutantPredictions> {
    let prepared = mutants
        .iter()
        .map(|m| prepare(model, m))
        .collect::<Result<Vec<_>>>()?;
    let mut needed = vec![false; model.spec().layers.len()];
    for p in &prepared {
        if let Some(l) = p.start {
            needed[l] = true;
        }
    }

    let mut original = Vec::with_capacity(set.len());
    let mut per_sample: Vec<Vec<usize>> = Vec::with_capacity(set.len());
    let positions: Vec<usize> = (0..set.len()).collect();
    for chunk in positions.chunks(CHUNK) {
        let rows = chunk
            .par_iter()
            .map(|&i| {
                let (x, _, id) = set.get(i);
                let run = || -> Result<(usize, Vec<usize>)> {
                    let (logits, cache) = trace(model, x, &needed)?;
                    let orig = argmax(&logits);
                    let preds = prepared
                        .iter()
                        .map(|p| run_mutant(p, orig, &cache))
                        .collect::<Result<_>>()?;
                    Ok((orig, preds))
                };
                run().map_err(|e| e.for_sample(id))
            })
            .collect::<Result<Vec<_>>>()?;
        for (o, p) in rows {
            original.push(o);
            per_sample.push(p);
        }
    }

    let mutants = (0..mutants.len())
        .map(|m| per_sample.iter().map(|row| row[m]).collect())
        .collect();
    Ok(MutantPredictions { original, mutants })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mutation::tests::small_model;
    use crate::mutation::{generate_mutant, Operator};

    #[test]
    fn incremental_matches_full_forward() {
        let m = small_model(12);
        let n = 40;
        let imgs: Vec<Tensor> = (0..n)
            .map(|i| Tensor::from_fn(&[1, 8, 8], |j| ((i * 5 + j * j) % 13) as f64 / 13.0))
            .collect();
        let set = Dataset::new(imgs, vec![0; n], (0..n as u64).collect(), 3).unwrap();
        let mut mutants = Vec::new();
        for (s, op) in Operator::ALL.into_iter().cycle().take(24).enumerate() {
            // high rates so that conv1 gets hit as well as conv2
            let rate = [0.002, 0.05, 0.3][s % 3];
            mutants.push(generate_mutant(&m, op, rate, s as u64, 2.0).unwrap());
        }
        assert!(mutants.iter().any(|mu| mu.first_layer() == Some(0)));
        assert!(mutants.iter().any(|mu| mu.first_layer() == Some(2)));
        mutants.push(super::super::Mutant {
            deltas: Vec::new(),
            ..mutants[0].clone()
        });

        let got = predict_mutants(&m, &mutants, &set).unwrap();
        for (i, (x, _, _)) in set.iter().enumerate() {
            assert_eq!(got.original[i], m.predict_class(x).unwrap());
            for (k, mu) in mutants.iter().enumerate() {
                assert_eq!(
                    got.mutants[k][i],
                    mu.apply(&m).unwrap().predict_class(x).unwrap()
                );
            }
        }
    }

    #[test]
    fn patched_preactivation_matches_recomputation() {
        let m = small_model(13);
        let x = Tensor::from_fn(&[1, 8, 8], |j| (j % 9) as f64 / 9.0);
        for seed in 0..6 {
            let mu = generate_mutant(&m, Operator::Gf, 0.1, seed, 1.0).unwrap();
            let p = prepare(&m, &mu).unwrap();
            let l = p.start.unwrap();
            let mut needed = vec![false; 5];
            needed[l] = true;
            let (_, cache) = trace(&m, &x, &needed).unwrap();
            let full = p
                .model
                .conv_preactivation(l, &cache[l].as_ref().unwrap().0)
                .unwrap();
            let z = patched_preactivation(&p, l, &cache).unwrap();
            for (a, b) in z.data().iter().zip(full.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
