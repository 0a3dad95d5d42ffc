use std::collections::BTreeSet;

use agentfuse::agents::{GeneratedImage, ImageAgentTeam, Provenance, RenderConfig};
use agentfuse::fusion::*;
use agentfuse::numerics::Tensor;
use agentfuse::rng::{rng_from_seed, DetRng};
use proptest::prelude::*;
use rand::Rng;

fn image(pixels: Tensor, tags: &[&str]) -> GeneratedImage {
    GeneratedImage {
        pixels,
        concept_tags: tags.iter().map(|s| s.to_string()).collect(),
        provenance: Provenance { agent: "t".into(), seed: 0, prompt_hash: 0 },
    }
}

fn random_image(rng: &mut DetRng, h: usize, w: usize, tags: &[&str]) -> GeneratedImage {
    image(Tensor::from_fn(vec![h, w, 3], |_| rng.random::<f64>()), tags)
}

fn seeded_candidates() -> Vec<GeneratedImage> {
    ImageAgentTeam::builtin(RenderConfig::default(), 7)
        .unwrap()
        .generate_candidates("a grand medieval castle stands on a rocky hill")
        .unwrap()
}

#[test]
fn simple_average_of_identical_images_is_exact() {
    let mut rng = rng_from_seed(3);
    let a = random_image(&mut rng, 16, 16, &["x"]);
    let out = fuse(&[a.clone(), a.clone(), a.clone()], &FusionChoice::new(FusionMethod::SimpleAverage), &FusionParams::default())
        .unwrap();
    assert_eq!(out.image.pixels, a.pixels);
}

#[test]
fn explicit_one_hot_weights_return_first_image() {
    let mut rng = rng_from_seed(4);
    let imgs: Vec<_> = (0..3).map(|_| random_image(&mut rng, 12, 12, &[])).collect();
    let params = FusionParams { explicit_weights: Some(vec![1.0, 0.0, 0.0]), ..Default::default() };
    let out = fuse(&imgs, &FusionChoice::new(FusionMethod::WeightedAverage), &params).unwrap();
    assert_eq!(out.image.pixels, imgs[0].pixels);
    let bad = FusionParams { explicit_weights: Some(vec![0.5, 0.6, 0.0]), ..Default::default() };
    assert!(fuse(&imgs, &FusionChoice::new(FusionMethod::WeightedAverage), &bad).is_err());
}

#[test]
fn transformer_output_matches_direct_recombination() {
    let imgs = seeded_candidates();
    let out = fuse(&imgs, &FusionChoice::new(FusionMethod::Transformer), &FusionParams { seed: 11, ..Default::default() })
        .unwrap();
    let FusionWeights::PerPixel { height, width, maps } = &out.weights else {
        panic!("transformer weights are per pixel");
    };
    for y in 0..*height {
        for x in 0..*width {
            let p = y * width + x;
            let total: f64 = maps.iter().map(|m| m[p]).sum();
            assert!((total - 1.0).abs() <= 1e-9);
            for c in 0..3 {
                let mut direct = 0.0;
                for (k, img) in imgs.iter().enumerate() {
                    direct += maps[k][p] * img.pixels.at3(y, x, c);
                }
                assert!((out.image.pixels.at3(y, x, c) - direct).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn weights_vary_across_the_transformer_map() {
    let imgs = seeded_candidates();
    let out = fuse(&imgs, &FusionChoice::new(FusionMethod::Transformer), &FusionParams::default()).unwrap();
    let FusionWeights::PerPixel { maps, .. } = out.weights else { unreachable!() };
    let (lo, hi) = maps[0].iter().fold((1.0f64, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi - lo > 1e-3);
}

#[test]
fn neural_alias_uses_the_deeper_network() {
    let imgs = seeded_candidates();
    let dynamic = fuse(&imgs, &FusionChoice::parse("dynamic_weight").unwrap(), &FusionParams::default()).unwrap();
    let neural = fuse(&imgs, &FusionChoice::parse("neural").unwrap(), &FusionParams::default()).unwrap();
    assert_ne!(dynamic.weights, neural.weights);
    assert!(neural.weights.max_simplex_error() <= 1e-9);
}

#[test]
fn fused_tags_are_the_union() {
    let mut rng = rng_from_seed(5);
    let imgs = vec![random_image(&mut rng, 8, 8, &["a", "b"]), random_image(&mut rng, 8, 8, &["c"])];
    for choice in FusionChoice::all() {
        let out = fuse(&imgs, &choice, &FusionParams::default()).unwrap();
        let want: BTreeSet<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert_eq!(out.image.concept_tags, want);
    }
}

#[test]
fn seeded_agent_quality_golden() {
    let imgs = seeded_candidates();
    let q: Vec<f64> = imgs.iter().map(image_quality_score).collect();
    let golden = [0.21275404427143302, 0.11446628192401483, 0.18922667734257376];
    for (a, b) in q.iter().zip(golden) {
        assert!((a - b).abs() < 1e-12, "{q:?}");
    }
}

#[test]
fn overall_score_reproduces_table_rows() {
    let w = OverallWeighting::default();
    assert_eq!(format!("{:.3}", overall_score(0.417, 0.625, w).unwrap()), "0.521");
    let low = overall_score(0.250, 0.625, w).unwrap();
    assert!((low - 0.4375).abs() < 1e-12);
    assert_eq!(format!("{:.3}", low + 1e-12), "0.438");
}

#[test]
fn benchmark_single_method_has_finite_time() {
    let imgs = seeded_candidates();
    let r = benchmark_fusion(
        &imgs,
        &[FusionChoice::new(FusionMethod::SimpleAverage)],
        &FusionParams::default(),
        OverallWeighting::default(),
        |_| Ok(0.5),
    )
    .unwrap();
    assert_eq!(r.len(), 1);
    assert!(r[0].elapsed_seconds.is_finite() && r[0].elapsed_seconds >= 0.0);
    assert_eq!(r[0].overall, overall_score(r[0].quality, 0.5, OverallWeighting::default()).unwrap());
}

#[test]
fn tag_based_similarity_is_method_invariant() {
    let imgs = seeded_candidates();
    let prompt: BTreeSet<String> = ["castle", "hill", "lake"].iter().map(|s| s.to_string()).collect();
    let sim = |img: &GeneratedImage| {
        let inter = img.concept_tags.intersection(&prompt).count() as f64;
        Ok(inter / prompt.len() as f64)
    };
    let reports =
        benchmark_fusion(&imgs, &FusionChoice::all(), &FusionParams::default(), OverallWeighting::default(), sim).unwrap();
    assert_eq!(reports.len(), 6);
    assert!(reports.iter().all(|r| r.similarity == reports[0].similarity));
    let methods: Vec<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, FusionMethod::ALL.map(|m| m.name()).to_vec());
}

#[test]
fn benchmark_scores_are_deterministic() {
    let imgs = seeded_candidates();
    let run = || {
        benchmark_fusion(&imgs, &FusionChoice::all(), &FusionParams::default(), OverallWeighting::default(), |_| Ok(0.3))
            .unwrap()
            .into_iter()
            .map(|r| (r.method, r.quality, r.similarity, r.overall))
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn benchmark_records_failures_without_aborting() {
    let imgs = seeded_candidates();
    let mut calls = 0;
    let reports = benchmark_fusion(
        &imgs,
        &[FusionChoice::new(FusionMethod::SimpleAverage), FusionChoice::new(FusionMethod::Attention)],
        &FusionParams::default(),
        OverallWeighting::default(),
        |_| {
            calls += 1;
            if calls == 1 {
                Err(agentfuse::Error::InvalidArgument("boom".into()))
            } else {
                Ok(1.0)
            }
        },
    )
    .unwrap();
    assert!(reports[0].error.is_some() && reports[0].quality.is_nan());
    assert!(reports[1].error.is_none());
}

#[test]
fn csv_row_schema() {
    let r = FusionReport {
        method: "transformer".into(),
        quality: 0.417,
        similarity: 0.625,
        overall: 0.521,
        elapsed_seconds: 0.0123456789,
        error: None,
    };
    assert_eq!(FusionReport::CSV_HEADER, "Method,Quality,Similarity,Overall,TimeSeconds");
    assert_eq!(r.csv_row(), "transformer,0.417000,0.625000,0.521000,0.012346");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_method_stays_in_envelope(seed in any::<u64>(), k in 2usize..5) {
        let mut rng = rng_from_seed(seed);
        let imgs: Vec<_> = (0..k).map(|i| random_image(&mut rng, 16, 16, if i == 0 { &["castle"] } else { &[] })).collect();
        let params = FusionParams { seed, prompt_tags: ["castle".to_string()].into(), ..Default::default() };
        for choice in FusionChoice::all() {
            let out = fuse(&imgs, &choice, &params).unwrap();
            prop_assert!(out.weights.all_nonnegative());
            prop_assert!(out.weights.max_simplex_error() <= 1e-9);
            for (i, v) in out.image.pixels.data().iter().enumerate() {
                let lo = imgs.iter().map(|m| m.pixels.data()[i]).fold(f64::INFINITY, f64::min);
                let hi = imgs.iter().map(|m| m.pixels.data()[i]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= *v && *v <= hi);
            }
        }
    }

    #[test]
    fn simple_average_ignores_order(seed in any::<u64>(), rot in 1usize..3) {
        let mut rng = rng_from_seed(seed);
        let imgs: Vec<_> = (0..3).map(|_| random_image(&mut rng, 8, 8, &[])).collect();
        let mut shuffled = imgs.clone();
        shuffled.rotate_left(rot);
        shuffled.swap(0, 1);
        let c = FusionChoice::new(FusionMethod::SimpleAverage);
        let a = fuse(&imgs, &c, &FusionParams::default()).unwrap();
        let b = fuse(&shuffled, &c, &FusionParams::default()).unwrap();
        prop_assert_eq!(a.image.pixels, b.image.pixels);
    }
}
