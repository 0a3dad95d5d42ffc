//! Deterministic stand-in encoders.
//!
//! Text is tokenized by lowercasing, deleting every character that is neither
//! alphanumeric nor whitespace, and splitting on whitespace. Each token is
//! hashed with 64-bit FNV-1a over its UTF-8 bytes (offset basis
//! `0xcbf29ce484222325`, prime `0x100000001b3`) and reduced modulo 768; term
//! frequencies accumulate in that bucket and the vector is L2-normalized.
//!
//! Images (`H x W x C`, values in `[0,1]`) are summarized by block statistics
//! over fixed grids, followed by a constant bias feature, zero-padded to 2048
//! and L2-normalized.

use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, l2_norm, Tensor};
use crate::rng::{derive_seed, rng_from_seed, uniform_symmetric};

pub const TEXT_DIM: usize = 768;
pub const IMAGE_DIM: usize = 2048;
pub const SHARED_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEmbedding {
    pub vector: Vec<f64>,
    pub source_token_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageFeature {
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedEmbedding {
    pub vector: Vec<f64>,
    pub modality: Modality,
}

/// Random linear maps from each modality into the shared space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionParams {
    pub text: Tensor,
    pub image: Tensor,
    pub seed: u64,
}

pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

pub fn token_bucket(token: &str) -> usize {
    let mut h = fnv::FnvHasher::default();
    h.write(token.as_bytes());
    (h.finish() % TEXT_DIM as u64) as usize
}

fn normalized(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let n = l2_norm(&v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(v)
}

/// Hashed bag-of-words embedding of already-normalized tokens.
pub fn embed_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<TextEmbedding> {
    let mut v = vec![0.0; TEXT_DIM];
    let mut count = 0;
    for t in tokens {
        let t = t.as_ref();
        if t.is_empty() {
            continue;
        }
        v[token_bucket(t)] += 1.0;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyInput("no tokens to embed".into()));
    }
    let vector = normalized(v).expect("nonzero term counts");
    Ok(TextEmbedding { vector, source_token_count: count })
}

pub fn embed_text(text: &str) -> Result<TextEmbedding> {
    embed_tokens(&tokenize(text))
}

fn check_image(image: &Tensor) -> Result<(usize, usize, usize)> {
    let s = image.shape();
    if s.len() != 3 {
        return Err(Error::invalid(format!("image must be H x W x C, got shape {s:?}")));
    }
    let (h, w, c) = (s[0], s[1], s[2]);
    if h < 8 || w < 8 {
        return Err(Error::invalid(format!("image must be at least 8x8, got {h}x{w}")));
    }
    if let Some(bad) = image.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("pixel value {bad} outside [0,1]")));
    }
    Ok((h, w, c))
}

/// Start and end of block `i` out of `n` over an extent, never empty.
fn block_range(i: usize, n: usize, extent: usize) -> (usize, usize) {
    let start = (i * extent / n).min(extent - 1);
    let end = ((i + 1) * extent / n).max(start + 1);
    (start, end)
}

/// Per-pixel forward-difference gradient magnitude for one channel.
pub fn gradient_magnitude(image: &Tensor, y: usize, x: usize, ch: usize) -> f64 {
    let s = image.shape();
    let v = image.at3(y, x, ch);
    let dx = if x + 1 < s[1] { image.at3(y, x + 1, ch) - v } else { 0.0 };
    let dy = if y + 1 < s[0] { image.at3(y + 1, x, ch) - v } else { 0.0 };
    (dx * dx + dy * dy).sqrt()
}

pub fn extract_image_features(image: &Tensor) -> Result<ImageFeature> {
    let (h, w, c) = check_image(image)?;
    let mut feats = Vec::with_capacity(IMAGE_DIM);
    // Coarse grid: mean, variance and gradient energy per block and channel.
    for by in 0..8 {
        let (y0, y1) = block_range(by, 8, h);
        for bx in 0..8 {
            let (x0, x1) = block_range(bx, 8, w);
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            for ch in 0..c {
                let (mut sum, mut sq, mut grad) = (0.0, 0.0, 0.0);
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = image.at3(y, x, ch);
                        sum += v;
                        sq += v * v;
                        grad += gradient_magnitude(image, y, x, ch);
                    }
                }
                let mean = sum / n;
                feats.push(mean);
                feats.push((sq / n - mean * mean).max(0.0));
                feats.push(grad / n);
            }
        }
    }
    // Fine grid: block means.
    for by in 0..16 {
        let (y0, y1) = block_range(by, 16, h);
        for bx in 0..16 {
            let (x0, x1) = block_range(bx, 16, w);
            let n = ((y1 - y0) * (x1 - x0)) as f64;
            for ch in 0..c {
                let mut sum = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        sum += image.at3(y, x, ch);
                    }
                }
                feats.push(sum / n);
            }
        }
    }
    feats.push(1.0);
    feats.resize(IMAGE_DIM, 0.0);
    let vector = normalized(feats).expect("bias feature keeps the vector nonzero");
    Ok(ImageFeature { vector })
}

impl ProjectionParams {
    pub fn new(seed: u64) -> Self {
        Self::with_dim(seed, SHARED_DIM)
    }

    pub fn with_dim(seed: u64, shared_dim: usize) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, &[1]));
        let text = Tensor::from_fn(vec![shared_dim, TEXT_DIM], |_| uniform_symmetric(&mut rng, 1.0));
        let mut rng = rng_from_seed(derive_seed(seed, &[2]));
        let image = Tensor::from_fn(vec![shared_dim, IMAGE_DIM], |_| uniform_symmetric(&mut rng, 1.0));
        Self { text, image, seed }
    }

    pub fn shared_dim(&self) -> usize {
        self.text.rows()
    }
}

pub fn project_to_shared(feature: &[f64], side: Modality, params: &ProjectionParams) -> Result<SharedEmbedding> {
    let matrix = match side {
        Modality::Text => &params.text,
        Modality::Image => &params.image,
    };
    if feature.len() != matrix.cols() {
        return Err(Error::invalid(format!(
            "{side:?} projection expects {} features, got {}",
            matrix.cols(),
            feature.len()
        )));
    }
    let projected = matrix.matvec(feature)?;
    let vector = normalized(projected)
        .ok_or_else(|| Error::DegenerateProjection(format!("{side:?} feature projects to the zero vector")))?;
    Ok(SharedEmbedding { vector, modality: side })
}

/// Cosine similarity, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("cosine of vectors with lengths {} and {}", a.len(), b.len())));
    }
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}
