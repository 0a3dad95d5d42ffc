//! Text quality metrics and the composite text reward.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_similarity, embed_tokens, tokenize};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextMetricReport {
    pub bleu: f64,
    pub rouge1_f1: f64,
    pub word_count: usize,
    pub coherence: f64,
    pub diversity: f64,
}

impl TextMetricReport {
    /// Scores `candidate` against `reference`; both are raw text.
    pub fn compute(candidate: &str, reference: &str) -> Result<Self> {
        let cand = tokenize(candidate);
        let refr = tokenize(reference);
        Ok(Self {
            bleu: bleu(&cand, &refr, 4)?,
            rouge1_f1: rouge1_f1(&cand, &refr)?,
            word_count: cand.len(),
            coherence: coherence(candidate),
            diversity: diversity(candidate),
        })
    }

    pub fn component(&self, key: &str) -> Option<f64> {
        match key {
            "bleu" => Some(self.bleu),
            "rouge" => Some(self.rouge1_f1),
            "coherence" => Some(self.coherence),
            "diversity" => Some(self.diversity),
            _ => None,
        }
    }
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU with add-one smoothing on every modified precision and the
/// brevity penalty `exp(min(0, 1 - |ref|/|cand|))`. An exact match scores 1.
pub fn bleu<S: AsRef<str>>(candidate: &[S], reference: &[S], max_n: usize) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("bleu needs nonempty candidate and reference".into()));
    }
    if max_n == 0 {
        return Err(Error::invalid("bleu max_n must be positive"));
    }
    if candidate.len() == reference.len()
        && candidate.iter().zip(reference).all(|(a, b)| a.as_ref() == b.as_ref())
    {
        return Ok(1.0);
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let refr = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let clipped: usize = cand
            .iter()
            .map(|(g, &c)| c.min(refr.get(g).copied().unwrap_or(0)))
            .sum();
        log_sum += ((clipped + 1) as f64 / (total + 1) as f64).ln();
    }
    let ratio = reference.len() as f64 / candidate.len() as f64;
    let bp = (1.0 - ratio).min(0.0).exp();
    Ok(bp * (log_sum / max_n as f64).exp())
}

/// Clipped unigram overlap F1, computed as `2o / (|cand| + |ref|)`.
pub fn rouge1_f1<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::EmptyInput("rouge needs nonempty candidate and reference".into()));
    }
    let cand = ngram_counts(candidate, 1);
    let refr = ngram_counts(reference, 1);
    let overlap: usize = cand
        .iter()
        .map(|(g, &c)| c.min(refr.get(g).copied().unwrap_or(0)))
        .sum();
    if overlap == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * overlap as f64 / (candidate.len() + reference.len()) as f64)
}

pub fn word_count(text: &str) -> usize {
    tokenize(text).len()
}

/// Distinct-2: unique bigrams over total bigrams; 0 below two tokens.
pub fn diversity(text: &str) -> f64 {
    let tokens = tokenize(text);
    if tokens.len() < 2 {
        return 0.0;
    }
    let unique: HashSet<(&str, &str)> = tokens.windows(2).map(|w| (w[0].as_str(), w[1].as_str())).collect();
    unique.len() as f64 / (tokens.len() - 1) as f64
}

/// Splits on `.`, `!` or `?` when followed by whitespace or end of text.
/// Sentences without tokens are dropped.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = vec![];
    let mut start = 0;
    for i in 0..chars.len() {
        let terminal = matches!(chars[i], '.' | '!' | '?')
            && chars.get(i + 1).is_none_or(|c| c.is_whitespace());
        if terminal {
            sentences.push(chars[start..=i].iter().collect::<String>());
            start = i + 1;
        }
    }
    if start < chars.len() {
        sentences.push(chars[start..].iter().collect());
    }
    sentences
        .iter()
        .map(|s| tokenize(s))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Mean positive cosine between adjacent sentence embeddings; 1 for a single sentence.
pub fn coherence(text: &str) -> f64 {
    let sentences = split_sentences(text);
    if sentences.len() < 2 {
        return 1.0;
    }
    let embeddings: Vec<Vec<f64>> = sentences
        .iter()
        .map(|s| embed_tokens(s).expect("sentence has tokens").vector)
        .collect();
    let total: f64 = embeddings
        .windows(2)
        .map(|p| cosine_similarity(&p[0], &p[1]).expect("unit vectors").max(0.0))
        .sum();
    total / (embeddings.len() - 1) as f64
}

/// Named nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    weights: BTreeMap<String, f64>,
}

pub const TEXT_REWARD_KEYS: [&str; 4] = ["bleu", "rouge", "coherence", "diversity"];

impl RewardWeights {
    pub fn new<K: Into<String>>(entries: impl IntoIterator<Item = (K, f64)>) -> Result<Self> {
        let weights: BTreeMap<String, f64> = entries.into_iter().map(|(k, v)| (k.into(), v)).collect();
        if weights.is_empty() {
            return Err(Error::config("reward weights are empty"));
        }
        if let Some((k, v)) = weights.iter().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::config(format!("weight {k} = {v} is not a nonnegative number")));
        }
        let total: f64 = weights.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("reward weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// 0.4 BLEU + 0.3 ROUGE + 0.2 coherence + 0.1 diversity.
    pub fn text_default() -> Self {
        Self::new([("bleu", 0.4), ("rouge", 0.3), ("coherence", 0.2), ("diversity", 0.1)])
            .expect("valid preset")
    }

    /// 0.5 similarity + 0.3 quality + 0.2 diversity.
    pub fn similarity_quality_diversity() -> Self {
        Self::new([("similarity", 0.5), ("quality", 0.3), ("diversity", 0.2)]).expect("valid preset")
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.weights.get(key).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Weighted sum over `component`, which must supply every weighted key.
    pub fn combine(&self, mut component: impl FnMut(&str) -> Option<f64>) -> Result<f64> {
        let mut total = 0.0;
        for (k, w) in self.iter() {
            let v = component(k).ok_or_else(|| Error::invalid(format!("missing reward component {k}")))?;
            total += w * v;
        }
        Ok(total)
    }
}

pub fn text_reward(report: &TextMetricReport, weights: &RewardWeights) -> Result<f64> {
    if let Some((k, _)) = weights.iter().find(|(k, _)| !TEXT_REWARD_KEYS.contains(k)) {
        return Err(Error::config(format!("unknown text reward key {k}")));
    }
    weights.combine(|k| report.component(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn bleu_exact_match_is_one() {
        let t = toks("one two three four five six seven eight nine ten");
        assert_eq!(bleu(&t, &t, 4).unwrap(), 1.0);
    }

    #[test]
    fn bleu_and_rouge_reject_empty() {
        let t = toks("a b");
        let e: Vec<String> = vec![];
        assert!(bleu(&e, &t, 4).is_err());
        assert!(rouge1_f1(&t, &e).is_err());
    }

    #[test]
    fn rouge_fixtures() {
        assert_eq!(rouge1_f1(&toks("the cat sat"), &toks("the cat ran")).unwrap(), 2.0 / 3.0);
        assert_eq!(rouge1_f1(&toks("a b c"), &toks("a b c")).unwrap(), 1.0);
        assert_eq!(rouge1_f1(&toks("a b"), &toks("c d")).unwrap(), 0.0);
    }

    #[test]
    fn word_counts() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("Hello, world!"), 2);
        assert_eq!(word_count("A grand medieval castle stands on a rocky hill."), 9);
    }

    #[test]
    fn diversity_fixtures() {
        assert_eq!(diversity("a b c d"), 1.0);
        assert_eq!(diversity("a a a a"), 1.0 / 3.0);
        assert_eq!(diversity("solo"), 0.0);
    }

    #[test]
    fn coherence_fixtures() {
        assert_eq!(coherence("just one sentence here"), 1.0);
        assert!((coherence("The tower rises. The tower rises.") - 1.0).abs() < 1e-12);
        // "castle" and "river" land in different hash buckets.
        assert_ne!(crate::embeddings::token_bucket("castle"), crate::embeddings::token_bucket("river"));
        assert_eq!(coherence("Castle! River?"), 0.0);
    }

    #[test]
    fn sentence_splitting_needs_trailing_space() {
        assert_eq!(split_sentences("v1.2 is out. Yes").len(), 2);
        assert_eq!(split_sentences("...").len(), 0);
    }

    #[test]
    fn reward_fixtures() {
        let w = RewardWeights::text_default();
        let mut r = TextMetricReport { bleu: 1.0, rouge1_f1: 1.0, word_count: 3, coherence: 1.0, diversity: 1.0 };
        assert!((text_reward(&r, &w).unwrap() - 1.0).abs() < 1e-12);
        r = TextMetricReport { bleu: 0.0, rouge1_f1: 0.0, word_count: 0, coherence: 0.0, diversity: 0.0 };
        assert_eq!(text_reward(&r, &w).unwrap(), 0.0);
        r = TextMetricReport { bleu: 1.0, rouge1_f1: 0.8, word_count: 9, coherence: 0.5, diversity: 0.2 };
        assert!((text_reward(&r, &w).unwrap() - 0.76).abs() < 1e-12);
        let bad = RewardWeights::new([("bleu", 0.5), ("novelty", 0.5)]).unwrap();
        assert!(matches!(text_reward(&r, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn weight_validation() {
        assert!(RewardWeights::new([("a", 0.5), ("b", 0.4)]).is_err());
        assert!(RewardWeights::new([("a", 1.5), ("b", -0.5)]).is_err());
        assert!(RewardWeights::new(Vec::<(String, f64)>::new()).is_err());
    }
}
