use condlcr::attribution::{conductance, feature_map_conductance, PathSpec};
use condlcr::data::{split, synth_shapes, Dataset};
use condlcr::detector::{
    confusion_report, roc_curve, select_threshold, Normalizer, ThresholdPolicy,
};
use condlcr::model::{Checkpoint, LayerSpec, Model, ModelSpec, TrainMeta};
use condlcr::mutation::{generate_mutant, kernel_count, kernels_for_rate, Operator};
use condlcr::Tensor;
use proptest::prelude::*;

fn small_model(seed: u64) -> Model {
    let spec = ModelSpec {
        input_shape: [1, 8, 8],
        num_classes: 3,
        layers: vec![
            LayerSpec::Conv {
                out_channels: 3,
                kernel: 3,
                stride: 1,
                padding: 1,
                activation: condlcr::model::Activation::Relu,
            },
            LayerSpec::Pool {
                kind: condlcr::model::PoolKind::Max,
                size: 2,
            },
            LayerSpec::Conv {
                out_channels: 4,
                kernel: 3,
                stride: 1,
                padding: 0,
                activation: condlcr::model::Activation::Relu,
            },
            LayerSpec::Dense {
                width: 3,
                activation: condlcr::model::Activation::Identity,
            },
        ],
    };
    Model::init(spec, seed).unwrap()
}

fn operator() -> impl Strategy<Value = Operator> {
    prop_oneof![
        Just(Operator::Gf),
        Just(Operator::Nai),
        Just(Operator::Ws),
        Just(Operator::Ns)
    ]
}

fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    prop::collection::vec((0u8..8, any::<bool>()), 2..80).prop_map(|v| {
        let mut s: Vec<f64> = v.iter().map(|p| p.0 as f64 / 8.0).collect();
        let mut l: Vec<bool> = v.iter().map(|p| p.1).collect();
        l[0] = true;
        l[1] = false;
        s[0] = s[0].max(0.0);
        (s, l)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mutants_touch_exactly_their_kernels(
        op in operator(),
        rate in 0.01f64..0.9,
        seed in any::<u64>(),
    ) {
        let model = small_model(3);
        let total = kernel_count(&model);
        let m = generate_mutant(&model, op, rate, seed, 1.0).unwrap();
        let k = kernels_for_rate(rate, total);
        // a neuron switch rewrites both kernels of each swapped pair
        if op == Operator::Ns {
            prop_assert!(m.deltas.len() >= k && m.deltas.len() <= 2 * k);
        } else {
            prop_assert_eq!(m.deltas.len(), k);
        }
        let keys: Vec<(usize, usize)> = m.deltas.iter().map(|d| (d.layer, d.kernel)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        prop_assert_eq!(&sorted, &keys);

        let mutated = m.apply(&model).unwrap();
        prop_assert_eq!(m.apply(&mutated).unwrap(), mutated.clone());
        for (i, (a, b)) in model.params().iter().zip(mutated.params()).enumerate() {
            let (Some(a), Some(b)) = (a, b) else { continue };
            prop_assert_eq!(&a.bias, &b.bias);
            if matches!(model.spec().layers[i], LayerSpec::Dense { .. }) {
                prop_assert_eq!(&a.weight, &b.weight);
            }
        }
    }

    #[test]
    fn nai_and_ws_preserve_kernel_content(rate in 0.05f64..0.5, seed in any::<u64>()) {
        let model = small_model(5);
        for op in [Operator::Nai, Operator::Ws] {
            let m = generate_mutant(&model, op, rate, seed, 1.0).unwrap();
            for d in &m.deltas {
                let w = &model.params()[d.layer].as_ref().unwrap().weight;
                let size = d.values.len();
                let orig = &w.data()[d.kernel * size..(d.kernel + 1) * size];
                let mut a: Vec<f64> = orig.iter().map(|v| if op == Operator::Nai { -v } else { *v }).collect();
                let mut b = d.values.clone();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn kernel_budget_is_monotone(a in 0.0001f64..1.0, b in 0.0001f64..1.0, total in 1usize..2000) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (kl, kh) = (kernels_for_rate(lo, total), kernels_for_rate(hi, total));
        prop_assert!(kl <= kh);
        prop_assert!(kl >= 1 && kh <= total);
        prop_assert!(kh as f64 >= hi * total as f64 - 1e-6);
    }

    #[test]
    fn feature_maps_sum_neuron_conductance(seed in any::<u64>(), steps in 1usize..12) {
        let model = small_model(seed);
        let x = Tensor::from_fn(&[1, 8, 8], |i| ((i as u64).wrapping_mul(seed | 1) % 97) as f64 / 97.0);
        let path = PathSpec::zero(&[1, 8, 8], steps).unwrap();
        let c = model.predict_class(&x).unwrap();
        let cond = conductance(&model, &x, &path, c, "conv2").unwrap();
        let maps = feature_map_conductance(&cond.neurons).unwrap();
        prop_assert_eq!(maps.len(), 4);
        prop_assert!((maps.iter().sum::<f64>() - cond.neurons.sum()).abs() < 1e-9);
        prop_assert!((cond.score - model.forward(&x).unwrap().data()[c]).abs() < 1e-12);
    }

    #[test]
    fn confusion_matches_roc_points((s, l) in scored()) {
        let roc = roc_curve(&s, &l).unwrap();
        for p in &roc.points {
            let c = confusion_report(&s, &l, p.threshold).unwrap();
            prop_assert_eq!(c.total(), s.len());
            prop_assert_eq!(c.recall_correct().unwrap(), p.recall_correct);
            prop_assert_eq!(c.recall_wrong().unwrap(), p.recall_wrong);
        }
    }

    #[test]
    fn favor_policies_meet_attained_targets((s, l) in scored(), target in 0.5f64..1.0) {
        let roc = roc_curve(&s, &l).unwrap();
        let d = select_threshold(&roc, ThresholdPolicy::FavorCorrect { target }).unwrap();
        if d.attained {
            prop_assert!(d.recall_correct >= target);
            // no admissible point catches more wrong predictions
            prop_assert!(roc.points.iter().filter(|p| p.recall_correct >= target).all(|p| p.recall_wrong <= d.recall_wrong));
        }
        let d = select_threshold(&roc, ThresholdPolicy::FavorWrong { target }).unwrap();
        if d.attained {
            prop_assert!(d.recall_wrong >= target);
            prop_assert!(roc.points.iter().filter(|p| p.recall_wrong >= target).all(|p| p.recall_correct <= d.recall_correct));
        }
    }

    #[test]
    fn normalizer_standardizes(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 3), 2..40)) {
        let n = Normalizer::fit(&rows);
        let z: Vec<Vec<f64>> = rows.iter().map(|r| n.apply(r)).collect();
        for j in 0..3 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9 || var == 0.0);
        }
    }

    #[test]
    fn split_partitions_ids(seed in any::<u64>(), a in 0.1f64..1.0, b in 0.1f64..1.0, c in 0.1f64..1.0) {
        let ds: Dataset = synth_shapes(12, 4, 0.2, 1).unwrap();
        let total = a + b + c;
        let s = split(&ds, [a / total, b / total, c / total], seed, false).unwrap();
        let mut ids: Vec<u64> = [&s.train, &s.val, &s.test].iter().flat_map(|d| d.ids().to_vec()).collect();
        prop_assert_eq!(ids.len(), ds.len());
        ids.sort_unstable();
        let mut all = ds.ids().to_vec();
        all.sort_unstable();
        prop_assert_eq!(ids, all);
        for (part, f) in [(&s.train, a), (&s.val, b), (&s.test, c)] {
            prop_assert!((part.len() as f64 - f / total * ds.len() as f64).abs() <= 1.0);
        }
    }

    #[test]
    fn checkpoints_round_trip(seed in any::<u64>()) {
        let ck = Checkpoint {
            model: small_model(seed),
            meta: TrainMeta {
                epochs: 2,
                seed,
                learning_rate: 0.01,
                momentum: 0.9,
                batch_size: 8,
                history: Vec::new(),
            },
        };
        prop_assert_eq!(Checkpoint::from_bytes(&ck.to_bytes()).unwrap(), ck);
    }
}
