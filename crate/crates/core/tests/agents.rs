use agentfuse::agents::*;
use agentfuse::embeddings::*;
use agentfuse::harness::ScenarioSuite;
use agentfuse::numerics::l2_norm;
use proptest::prelude::*;
use sha2::{Digest, Sha256};

#[test]
fn shared_prefix_prompts_have_golden_cosine() {
    // Buckets: medieval 646, castle 505, on 112, a 652, hill 554 (all
    // distinct), so the cosine is 2 / sqrt(2 * 5).
    let a = embed_text("medieval castle").unwrap();
    let b = embed_text("medieval castle on a hill").unwrap();
    let c = cosine_similarity(&a.vector, &b.vector).unwrap();
    assert!((c - 0.6324555320336758).abs() < 1e-12);
    assert!((c - 2.0 / 10f64.sqrt()).abs() < 1e-12);
    assert_eq!(b.source_token_count, 5);
}

#[test]
fn projection_golden_prefix() {
    let p = ProjectionParams::new(42);
    let z = project_to_shared(&embed_text("medieval castle").unwrap().vector, Modality::Text, &p).unwrap();
    assert!((l2_norm(&z.vector) - 1.0).abs() < 1e-12);
    let golden = [0.02491162915388163, -0.06148356318138165, 0.05486394083117669, -0.10813579809858874];
    for (got, want) in z.vector.iter().zip(golden) {
        assert!((got - want).abs() < 1e-12, "{:?}", &z.vector[..4]);
    }
    // Oracle: the two hot columns of the text matrix, summed and normalized.
    let cols = [agentfuse::embeddings::token_bucket("medieval"), agentfuse::embeddings::token_bucket("castle")];
    let raw: Vec<f64> = (0..SHARED_DIM).map(|r| cols.iter().map(|&c| p.text.data()[r * TEXT_DIM + c]).sum()).collect();
    let n = l2_norm(&raw);
    for (got, want) in z.vector.iter().zip(&raw) {
        assert!((got - want / n).abs() < 1e-12);
    }
}

#[test]
fn enrichment_is_at_least_tenfold_with_exact_prefix() {
    let suite = ScenarioSuite::builtin("paper5").unwrap();
    let team = TextAgentTeam::builtin(42);
    let routing = DomainRouting::from_team(&team);
    for s in &suite.scenarios {
        let prompt = tokenize(&s.prompt);
        assert_eq!(prompt.len(), 9, "{}", s.name);
        let out = multi_agent_enhance(&prompt, &team, &routing, 12).unwrap();
        assert_eq!(&out.tokens[..prompt.len()], prompt.as_slice());
        assert!(out.word_count() >= 10 * prompt.len(), "{}: {}", s.name, out.word_count());
        assert_eq!(routing.route(&prompt), Some(s.domain), "{}", s.name);
    }
}

#[test]
fn agent_image_golden_checksum() {
    let team = ImageAgentTeam::builtin(RenderConfig::default(), 42).unwrap();
    let imgs = team.generate_candidates("a quiet mountain landscape with a lake at dawn").unwrap();
    let sums: Vec<String> = imgs.iter().map(|i| hex::encode(Sha256::digest(i.pixels.to_bytes()))).collect();
    let golden = [
        "314edd017240b165bc1b28369d6c3afc4362be4d9b4c458575325875510657b6",
        "c9ca88b98d9aae21d4a467f1c9b8fc532ff38d16882d6dcdd4b60f628e8b91f9",
        "608eba2b601722be3ba9804f2e7f8bfacad65a3547d10fa2442d1e48a79f8697",
    ];
    assert_eq!(sums, golden.to_vec());
    assert!(imgs[2].concept_tags.contains("lake"));
    assert!(imgs[2].concept_tags.contains("landscape"));
}

#[test]
fn image_features_are_unit_and_stable() {
    let team = ImageAgentTeam::builtin(RenderConfig::square(32), 3).unwrap();
    let imgs = team.generate_candidates("portrait of an old man").unwrap();
    for img in &imgs {
        let f = extract_image_features(&img.pixels).unwrap();
        assert_eq!(f.vector.len(), IMAGE_DIM);
        assert!((l2_norm(&f.vector) - 1.0).abs() < 1e-12);
        assert_eq!(f, extract_image_features(&img.pixels).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_images_are_deterministic_and_in_range(seed in any::<u64>(), words in prop::collection::vec("[a-z]{2,8}", 1..6)) {
        let prompt = words.join(" ");
        let team = ImageAgentTeam::builtin(RenderConfig::square(16), seed).unwrap();
        let a = team.generate_candidates(&prompt).unwrap();
        let b = team.generate_candidates(&prompt).unwrap();
        prop_assert_eq!(&a, &b);
        for img in &a {
            prop_assert_eq!(img.shape(), (16, 16, 3));
            prop_assert!(img.pixels.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn text_embedding_is_unit_norm(words in prop::collection::vec("[a-z]{1,6}", 1..20)) {
        let e = embed_text(&words.join(" ")).unwrap();
        prop_assert_eq!(e.vector.len(), TEXT_DIM);
        prop_assert!((l2_norm(&e.vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enhancement_keeps_prefix(seed in 0u64..500, words in prop::collection::vec("[a-z]{2,8}", 1..10)) {
        let team = TextAgentTeam::builtin(seed);
        let routing = DomainRouting::from_team(&team);
        let prompt: Vec<String> = words;
        let out = multi_agent_enhance(&prompt, &team, &routing, 6).unwrap();
        prop_assert_eq!(&out.tokens[..prompt.len()], prompt.as_slice());
    }
}
