//! Text-image consistency: contrastive loss in the shared space, keyword and
//! object overlap, and the weighted composite score.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::agents::GeneratedImage;
use crate::embeddings::{
    cosine_similarity, embed_text, extract_image_features, project_to_shared, tokenize, Modality,
    ProjectionParams, SharedEmbedding, IMAGE_DIM, SHARED_DIM, TEXT_DIM,
};
use crate::error::{Error, Result};
use crate::numerics::{l2_norm, Tensor};
use crate::rng::{derive_seed, label, rng_from_seed, uniform_symmetric};

pub type KeywordSet = BTreeSet<String>;

pub const DEFAULT_TEMPERATURE: f64 = 0.07;
pub const DEFAULT_DISTRACTORS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyWeights {
    pub contrast: f64,
    pub cos: f64,
    pub obj: f64,
}

impl Default for ConsistencyWeights {
    fn default() -> Self {
        Self { contrast: 0.4, cos: 0.3, obj: 0.3 }
    }
}

impl ConsistencyWeights {
    pub fn new(contrast: f64, cos: f64, obj: f64) -> Result<Self> {
        let w = Self { contrast, cos, obj };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.contrast, self.cos, self.obj];
        if parts.iter().any(|p| !(*p >= 0.0)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("consistency weights {parts:?} must be nonnegative and sum to 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationDirection {
    TextToImage,
    ImageToText,
    Bidirectional,
}

impl IntegrationDirection {
    pub const ALL: [IntegrationDirection; 3] =
        [IntegrationDirection::TextToImage, IntegrationDirection::ImageToText, IntegrationDirection::Bidirectional];

    pub fn name(self) -> &'static str {
        match self {
            IntegrationDirection::TextToImage => "text_to_image",
            IntegrationDirection::ImageToText => "image_to_text",
            IntegrationDirection::Bidirectional => "bidirectional",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::config(format!("unknown integration direction {s:?}")))
    }
}

impl AsRef<[f64]> for SharedEmbedding {
    fn as_ref(&self) -> &[f64] {
        &self.vector
    }
}

fn unit<T: AsRef<[f64]>>(v: &T) -> Result<Vec<f64>> {
    let v = v.as_ref();
    let n = l2_norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::invalid("contrastive loss of a zero or non-finite embedding"));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-pair InfoNCE loss with rows over the anchor modality. Pair `i` is
/// `(text[i], image[i])`; every other entry of the batch is a negative.
pub fn contrastive_loss<T: AsRef<[f64]>, U: AsRef<[f64]>>(
    text: &[T],
    image: &[U],
    tau: f64,
    anchor: IntegrationDirection,
) -> Result<Vec<f64>> {
    if text.len() != image.len() || text.is_empty() {
        return Err(Error::invalid(format!("contrastive batch sizes {} and {}", text.len(), image.len())));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::config(format!("temperature must be positive, got {tau}")));
    }
    let t: Vec<Vec<f64>> = text.iter().map(unit).collect::<Result<_>>()?;
    let v: Vec<Vec<f64>> = image.iter().map(unit).collect::<Result<_>>()?;
    if t.iter().chain(&v).any(|x| x.len() != t[0].len()) {
        return Err(Error::invalid("contrastive embeddings differ in dimension"));
    }
    let n = t.len();
    let s: Vec<Vec<f64>> = t
        .iter()
        .map(|ti| v.iter().map(|vj| crate::numerics::dot(ti, vj) / tau).collect())
        .collect();
    let text_anchor = |i: usize| logsumexp(s[i].iter().copied()) - s[i][i];
    let image_anchor = |i: usize| logsumexp((0..n).map(|j| s[j][i])) - s[i][i];
    // With a single candidate the softmax is exactly 1.
    let clean = |x: f64| if n == 1 { 0.0 } else { x.max(0.0) };
    Ok((0..n)
        .map(|i| match anchor {
            IntegrationDirection::TextToImage => clean(text_anchor(i)),
            IntegrationDirection::ImageToText => clean(image_anchor(i)),
            IntegrationDirection::Bidirectional => 0.5 * (clean(text_anchor(i)) + clean(image_anchor(i))),
        })
        .collect())
}

fn stopwords() -> &'static BTreeSet<&'static str> {
    static WORDS: OnceLock<BTreeSet<&'static str>> = OnceLock::new();
    WORDS.get_or_init(|| {
        include_str!("../data/stopwords.txt")
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect()
    })
}

pub fn is_stopword(word: &str) -> bool {
    stopwords().contains(word)
}

pub fn keyword_extract(text: &str) -> KeywordSet {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Stand-in detector: the image's own concept tags, normalized.
pub fn object_detect(image: &GeneratedImage) -> KeywordSet {
    image
        .concept_tags
        .iter()
        .flat_map(|t| tokenize(t))
        .filter(|t| !is_stopword(t))
        .collect()
}

/// Jaccard index; two empty sets agree perfectly.
pub fn object_validation(text_keywords: &KeywordSet, image_objects: &KeywordSet) -> f64 {
    let union = text_keywords.union(image_objects).count();
    if union == 0 {
        return 1.0;
    }
    text_keywords.intersection(image_objects).count() as f64 / union as f64
}

pub fn consistency_score(contrastive_loss: f64, cos_sim: f64, obj_valid: f64, weights: &ConsistencyWeights) -> f64 {
    let c = weights.contrast * (1.0 - contrastive_loss).clamp(0.0, 1.0)
        + weights.cos * cos_sim.clamp(0.0, 1.0)
        + weights.obj * obj_valid.clamp(0.0, 1.0);
    c.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub score: f64,
    pub contrastive_loss: f64,
    pub cos_sim: f64,
    pub obj_valid: f64,
    pub clip_similarity: f64,
    pub concept_coverage: f64,
    pub semantic_alignment: f64,
    pub direction: IntegrationDirection,
    #[serde(skip, default)]
    pub weights: ConsistencyWeights,
}

impl ConsistencyReport {
    /// The composite recomputed from the stored components.
    pub fn recompute(&self) -> f64 {
        consistency_score(self.contrastive_loss, self.cos_sim, self.obj_valid, &self.weights)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyParams {
    pub tau: f64,
    pub distractors: usize,
    pub seed: u64,
    pub weights: ConsistencyWeights,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self { tau: DEFAULT_TEMPERATURE, distractors: DEFAULT_DISTRACTORS, seed: 0, weights: ConsistencyWeights::default() }
    }
}

/// Shared-space inputs for one text-image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbeddings {
    pub text: SharedEmbedding,
    pub image: SharedEmbedding,
    pub text_keywords: KeywordSet,
    pub image_objects: KeywordSet,
}

/// Holds the projections, cross-map and distractor batch so repeated
/// evaluations share them.
#[derive(Debug, Clone)]
pub struct ConsistencyAssessor {
    params: ConsistencyParams,
    projection: ProjectionParams,
    cross_map: Tensor,
    distractors: Vec<(Vec<f64>, Vec<f64>)>,
}

impl ConsistencyAssessor {
    pub fn new(params: ConsistencyParams) -> Result<Self> {
        params.weights.validate()?;
        if !(params.tau > 0.0) {
            return Err(Error::config(format!("temperature must be positive, got {}", params.tau)));
        }
        let projection = ProjectionParams::new(params.seed);
        let mut rng = rng_from_seed(derive_seed(params.seed, &[label("cross-map")]));
        let cross_map = Tensor::from_fn(vec![TEXT_DIM, IMAGE_DIM], |_| uniform_symmetric(&mut rng, 1.0));
        let mut rng = rng_from_seed(derive_seed(params.seed, &[label("distractors")]));
        let mut draw = || (0..SHARED_DIM).map(|_| uniform_symmetric(&mut rng, 1.0)).collect::<Vec<f64>>();
        let distractors = (0..params.distractors).map(|_| (draw(), draw())).collect();
        Ok(Self { params, projection, cross_map, distractors })
    }

    pub fn params(&self) -> &ConsistencyParams {
        &self.params
    }

    pub fn projection(&self) -> &ProjectionParams {
        &self.projection
    }

    /// Scores one pair in the shared space against the seeded distractors.
    /// Coverage and alignment are filled by [`Self::evaluate`]; here they
    /// are 0.
    pub fn assess(&self, pair: &PairEmbeddings, direction: IntegrationDirection) -> Result<ConsistencyReport> {
        let mut texts: Vec<&[f64]> = vec![&pair.text.vector];
        let mut images: Vec<&[f64]> = vec![&pair.image.vector];
        for (t, i) in &self.distractors {
            texts.push(t);
            images.push(i);
        }
        let loss = contrastive_loss(&texts, &images, self.params.tau, direction)?[0];
        let cos_sim = cosine_similarity(&pair.text.vector, &pair.image.vector)?;
        let obj_valid = object_validation(&pair.text_keywords, &pair.image_objects);
        let weights = self.params.weights;
        Ok(ConsistencyReport {
            score: consistency_score(loss, cos_sim, obj_valid, &weights),
            contrastive_loss: loss,
            cos_sim,
            obj_valid,
            clip_similarity: ((cos_sim + 1.0) / 2.0).clamp(0.0, 1.0),
            concept_coverage: 0.0,
            semantic_alignment: 0.0,
            direction,
            weights,
        })
    }

    /// Full evaluation of a text against a generated image.
    pub fn evaluate(
        &self,
        text: &str,
        image: &GeneratedImage,
        direction: IntegrationDirection,
        concepts: &[String],
    ) -> Result<ConsistencyReport> {
        if tokenize(text).is_empty() {
            return Err(Error::EmptyInput("consistency text has no tokens".into()));
        }
        let text_raw = embed_text(text)?.vector;
        let image_raw = extract_image_features(&image.pixels)?.vector;
        let pair = PairEmbeddings {
            text: project_to_shared(&text_raw, Modality::Text, &self.projection)?,
            image: project_to_shared(&image_raw, Modality::Image, &self.projection)?,
            text_keywords: keyword_extract(text),
            image_objects: object_detect(image),
        };
        let mut report = self.assess(&pair, direction)?;
        report.concept_coverage = concept_coverage(concepts, &pair.image_objects);
        let mapped = self.cross_map.matvec(&image_raw)?;
        report.semantic_alignment = cosine_similarity(&mapped, &text_raw).map_or(0.0, |c| c.clamp(0.0, 1.0));
        Ok(report)
    }

    /// Similarity between a text and an image on `[0,1]`, used to score fused
    /// images.
    pub fn clip_similarity(&self, text: &str, image: &GeneratedImage) -> Result<f64> {
        let t = project_to_shared(&embed_text(text)?.vector, Modality::Text, &self.projection)?;
        let i = project_to_shared(&extract_image_features(&image.pixels)?.vector, Modality::Image, &self.projection)?;
        Ok(((cosine_similarity(&t.vector, &i.vector)? + 1.0) / 2.0).clamp(0.0, 1.0))
    }
}

/// Share of scenario concepts present among the detected objects. An empty
/// concept list is fully covered.
pub fn concept_coverage(concepts: &[String], objects: &KeywordSet) -> f64 {
    let wanted: BTreeSet<String> = concepts.iter().map(|c| c.trim().to_lowercase()).filter(|c| !c.is_empty()).collect();
    if wanted.is_empty() {
        return 1.0;
    }
    wanted.iter().filter(|c| objects.contains(*c)).count() as f64 / wanted.len() as f64
}

/// Builds an assessor and evaluates one pair.
pub fn evaluate_integration(
    text: &str,
    image: &GeneratedImage,
    direction: IntegrationDirection,
    concepts: &[String],
    params: &ConsistencyParams,
) -> Result<ConsistencyReport> {
    ConsistencyAssessor::new(params.clone())?.evaluate(text, image, direction, concepts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(words: &[&str]) -> KeywordSet {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn keyword_fixtures() {
        assert!(keyword_extract("the a of").is_empty());
        assert_eq!(keyword_extract("medieval castle on the hill"), set(&["medieval", "castle", "hill"]));
        let k = keyword_extract("The old wizard, in a dark forest");
        let joined = k.iter().cloned().collect::<Vec<_>>().join(" ");
        assert_eq!(keyword_extract(&joined), k);
    }

    #[test]
    fn jaccard_fixtures() {
        assert_eq!(object_validation(&set(&["a", "b"]), &set(&["b", "c"])), 1.0 / 3.0);
        assert_eq!(object_validation(&set(&["x"]), &set(&["x"])), 1.0);
        assert_eq!(object_validation(&set(&[]), &set(&[])), 1.0);
        assert_eq!(object_validation(&set(&["x"]), &set(&[])), 0.0);
    }

    #[test]
    fn orthogonal_pairs_closed_form() {
        let t = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let losses = contrastive_loss(&t, &t, 1.0, IntegrationDirection::TextToImage).unwrap();
        let expected = (1.0 + (-1.0f64).exp()).ln();
        for l in losses {
            assert!((l - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_batches() {
        let a = vec![vec![1.0, 0.0]];
        let b = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(matches!(contrastive_loss(&a, &b, 0.1, IntegrationDirection::TextToImage), Err(Error::InvalidArgument(_))));
        assert!(matches!(contrastive_loss(&a, &a, 0.0, IntegrationDirection::TextToImage), Err(Error::Config(_))));
        assert!(ConsistencyWeights::new(0.5, 0.5, 0.5).is_err());
    }

    #[test]
    fn coverage_counts_found_concepts() {
        let objs = set(&["castle", "tower"]);
        assert_eq!(concept_coverage(&["castle".into(), "moat".into()], &objs), 0.5);
        assert_eq!(concept_coverage(&[], &objs), 1.0);
    }
}
