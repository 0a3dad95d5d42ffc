mod common;

use agentfuse::text_metrics::{bleu, rouge1_f1, text_reward, RewardWeights, TextMetricReport};
use common::{brute_bleu, brute_clipped, brute_rouge1, toks};
use proptest::prelude::*;

const VOCAB: [&str; 5] = ["the", "cat", "sat", "on", "mat"];

fn sentence() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(0usize..VOCAB.len(), 1..=12)
        .prop_map(|ix| ix.into_iter().map(|i| VOCAB[i].to_string()).collect())
}

#[test]
fn cat_on_mat_matches_hand_counts() {
    let c = toks("the cat sat on the mat");
    let r = toks("the cat is on the mat");
    // unigram 5/6, bigram 3/5, trigram 1/4, 4-gram 0/3
    assert_eq!(brute_clipped(&c, &r, 1), (5, 6));
    assert_eq!(brute_clipped(&c, &r, 2), (3, 5));
    assert_eq!(brute_clipped(&c, &r, 3), (1, 4));
    assert_eq!(brute_clipped(&c, &r, 4), (0, 3));
    let expected = ((6.0 / 7.0) * (4.0 / 6.0) * (2.0 / 5.0) * (1.0 / 4.0f64)).powf(0.25);
    assert!((bleu(&c, &r, 4).unwrap() - expected).abs() < 1e-12);
    assert_eq!(bleu(&c, &r, 4).unwrap(), brute_bleu(&c, &r));
}

#[test]
fn zero_overlap_hits_smoothed_floor() {
    let c: Vec<String> = (0..24).map(|i| format!("x{i}")).collect();
    let r: Vec<String> = (0..24).map(|i| format!("y{i}")).collect();
    let b = bleu(&c, &r, 4).unwrap();
    assert!(b > 0.0 && b < 0.05, "{b}");
    assert_eq!(b, brute_bleu(&c, &r));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn bleu_and_rouge_match_oracle(c in sentence(), r in sentence()) {
        prop_assert_eq!(bleu(&c, &r, 4).unwrap(), brute_bleu(&c, &r));
        prop_assert_eq!(rouge1_f1(&c, &r).unwrap(), brute_rouge1(&c, &r));
        prop_assert_eq!(rouge1_f1(&c, &r).unwrap(), rouge1_f1(&r, &c).unwrap());
        let b = bleu(&c, &r, 4).unwrap();
        prop_assert!((0.0..=1.0).contains(&b));
    }

    #[test]
    fn text_reward_monotone(
        base in prop::array::uniform4(0.0f64..1.0),
        which in 0usize..4,
        bump in 0.0f64..1.0,
    ) {
        let w = RewardWeights::text_default();
        let mk = |v: [f64; 4]| TextMetricReport { bleu: v[0], rouge1_f1: v[1], word_count: 1, coherence: v[2], diversity: v[3] };
        let mut up = base;
        up[which] = (up[which] + bump).min(1.0);
        let lo = text_reward(&mk(base), &w).unwrap();
        let hi = text_reward(&mk(up), &w).unwrap();
        prop_assert!(hi >= lo);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&hi));
    }
}
