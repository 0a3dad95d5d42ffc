use agentfuse::numerics::{
    finite_difference_gradient, max_relative_error, multi_head_attention, softmax, Activation, AttentionParams, Mlp,
};
use proptest::prelude::*;

#[test]
fn softmax_one_two_three_matches_extended_precision() {
    // 40-digit evaluation of e^k / (e + e^2 + e^3).
    let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
    let p = softmax(&[1.0, 2.0, 3.0], 1.0).unwrap();
    for (a, b) in p.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15, "{a} vs {b}");
    }
}

/// Straight-line two-layer tanh evaluation written out index by index.
fn oracle_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for layer in net.layers() {
        let w = &layer.weight;
        let mut next = vec![0.0; w.rows()];
        for r in 0..w.rows() {
            let mut acc = layer.bias[r];
            for c in 0..w.cols() {
                acc += w.data()[r * w.cols() + c] * h[c];
            }
            next[r] = match layer.activation {
                Activation::Tanh => acc.tanh(),
                Activation::Relu => acc.max(0.0),
                Activation::Identity => acc,
            };
        }
        h = next;
    }
    h
}

#[test]
fn seeded_two_layer_forward_matches_oracle() {
    let net = Mlp::new(&[5, 7, 3], &[Activation::Tanh, Activation::Tanh], 2024).unwrap();
    let x = [0.4, -1.2, 0.05, 2.0, -0.3];
    let y = net.predict(&x).unwrap();
    let o = oracle_forward(&net, &x);
    for (a, b) in y.iter().zip(&o) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn backward_matches_finite_differences_on_seeded_nets() {
    for seed in 0..25u64 {
        let net = Mlp::new(&[4, 6, 5, 3], &[Activation::Tanh, Activation::Tanh, Activation::Identity], seed).unwrap();
        let x = [0.3, -0.7, 1.1, 0.2];
        let g = [1.0, -0.5, 0.25];
        let loss = |n: &Mlp| {
            let y = n.predict(&x).unwrap();
            y.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = net.forward(&x).unwrap();
        let analytic = net.backward(&cache, &g).unwrap();
        let numeric = finite_difference_gradient(loss, &net, 1e-5).unwrap();
        let err = max_relative_error(&analytic.flat(), &numeric.flat(), 1e-7);
        assert!(err < 1e-4, "seed {seed}: relative error {err}");
    }
}

fn direct_attention(p: &AttentionParams, q: &[Vec<f64>], k: &[Vec<f64>], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = p.model_dim;
    let dh = p.head_dim();
    let mut cur = q.to_vec();
    for layer in &p.layers {
        let mut next = vec![vec![0.0; d]; cur.len()];
        for (i, qi) in cur.iter().enumerate() {
            let mut concat = vec![0.0; d];
            for (h, head) in layer.heads.iter().enumerate() {
                let proj = |m: &agentfuse::numerics::Tensor, x: &[f64]| -> Vec<f64> {
                    (0..dh).map(|r| (0..d).map(|c| m.at2(r, c) * x[c]).sum()).collect()
                };
                let qp = proj(&head.query, qi);
                let mut scores = vec![];
                for kj in k {
                    let kp = proj(&head.key, kj);
                    scores.push(qp.iter().zip(&kp).map(|(a, b)| a * b).sum::<f64>() / (dh as f64).sqrt());
                }
                let m = scores.iter().cloned().fold(f64::MIN, f64::max);
                let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
                for (j, vj) in v.iter().enumerate() {
                    let w = (scores[j] - m).exp() / z;
                    let vp = proj(&head.value, vj);
                    for c in 0..dh {
                        concat[h * dh + c] += w * vp[c];
                    }
                }
            }
            for r in 0..d {
                next[i][r] = (0..d).map(|c| layer.output.at2(r, c) * concat[c]).sum();
            }
        }
        cur = next;
    }
    cur
}

#[test]
fn length_three_attention_matches_direct_loop() {
    let p = AttentionParams::random(8, 4, 2, 77).unwrap();
    let seq: Vec<Vec<f64>> = (0..3)
        .map(|i| (0..8).map(|c| ((i * 8 + c) as f64 * 0.37).sin()).collect())
        .collect();
    let out = multi_head_attention(&p, &seq, &seq, &seq).unwrap();
    let oracle = direct_attention(&p, &seq, &seq, &seq);
    for (a, b) in out.sequence.iter().flatten().zip(oracle.iter().flatten()) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn single_head_identity_projection_output_is_exact_convex_combination() {
    let p = AttentionParams::convex(4, 1, 1, 3).unwrap();
    let k: Vec<Vec<f64>> = vec![vec![0.1, 0.9, 0.3, 0.2], vec![0.5, 0.5, 0.0, 1.0], vec![0.7, 0.2, 0.4, 0.6]];
    let out = multi_head_attention(&p, &k[..1], &k, &k).unwrap();
    let w = &out.weights[0][0][0];
    for c in 0..4 {
        let mix: f64 = (0..3).map(|j| w[j] * k[j][c]).sum();
        assert!((out.sequence[0][c] - mix).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant(
        logits in prop::collection::vec(-30.0f64..30.0, 1..12),
        shift in -100.0f64..100.0,
        temp in 0.5f64..5.0,
    ) {
        let p = softmax(&logits, temp).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let q = softmax(&shifted, temp).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn convex_attention_stays_in_value_envelope(
        values in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 8), 1..6),
        seed in 0u64..1000,
    ) {
        let p = AttentionParams::convex(8, 4, 2, seed).unwrap();
        let out = multi_head_attention(&p, &values, &values, &values).unwrap();
        for row in &out.sequence {
            for (c, x) in row.iter().enumerate() {
                let lo = values.iter().map(|v| v[c]).fold(f64::INFINITY, f64::min);
                let hi = values.iter().map(|v| v[c]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*x >= lo - 1e-12 && *x <= hi + 1e-12);
            }
        }
        for layer in &out.weights {
            for head in layer {
                for row in head {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_is_pure(seed in 0u64..10_000, x in prop::collection::vec(-2.0f64..2.0, 3)) {
        let a = Mlp::new(&[3, 4, 2], &[Activation::Relu, Activation::Identity], seed).unwrap();
        let b = Mlp::new(&[3, 4, 2], &[Activation::Relu, Activation::Identity], seed).unwrap();
        let ya: Vec<u64> = a.predict(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        let yb: Vec<u64> = b.predict(&x).unwrap().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(ya, yb);
    }
}
