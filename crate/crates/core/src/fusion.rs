//! Fusion of per-agent candidate images into one output, plus the fusion
//! benchmark and its scoring.
//!
//! Every method produces convex weights (global or per pixel), so a fused
//! pixel always lies between the smallest and largest candidate values at
//! that position. The weighted sum is clamped into that envelope to absorb
//! rounding.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::{GeneratedImage, Provenance};
use crate::embeddings::gradient_magnitude;
use crate::error::{Error, Result};
use crate::numerics::{multi_head_attention, softmax, Activation, AttentionParams, Mlp, Tensor};
use crate::rng::{derive_seed, label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMethod {
    SimpleAverage,
    WeightedAverage,
    Attention,
    Transformer,
    DynamicWeight,
    ContentAware,
}

impl FusionMethod {
    pub const ALL: [FusionMethod; 6] = [
        FusionMethod::SimpleAverage,
        FusionMethod::WeightedAverage,
        FusionMethod::Attention,
        FusionMethod::Transformer,
        FusionMethod::DynamicWeight,
        FusionMethod::ContentAware,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FusionMethod::SimpleAverage => "simple_average",
            FusionMethod::WeightedAverage => "weighted_average",
            FusionMethod::Attention => "attention",
            FusionMethod::Transformer => "transformer",
            FusionMethod::DynamicWeight => "dynamic_weight",
            FusionMethod::ContentAware => "content_aware",
        }
    }
}

/// A named fusion configuration. `neural` is an alias for the dynamic-weight
/// method with a deeper weight network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionChoice {
    pub label: String,
    pub method: FusionMethod,
    pub dynamic_hidden: Vec<usize>,
}

pub const DYNAMIC_HIDDEN: [usize; 2] = [512, 256];
pub const NEURAL_HIDDEN: [usize; 3] = [512, 512, 256];

impl FusionChoice {
    pub fn new(method: FusionMethod) -> Self {
        Self { label: method.name().to_string(), method, dynamic_hidden: DYNAMIC_HIDDEN.to_vec() }
    }

    pub fn parse(name: &str) -> Result<Self> {
        if name == "neural" {
            return Ok(Self {
                label: "neural".into(),
                method: FusionMethod::DynamicWeight,
                dynamic_hidden: NEURAL_HIDDEN.to_vec(),
            });
        }
        FusionMethod::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .map(Self::new)
            .ok_or_else(|| Error::config(format!("unknown fusion method {name:?}")))
    }

    pub fn parse_list(list: &str) -> Result<Vec<Self>> {
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(Self::parse).collect()
    }

    pub fn all() -> Vec<Self> {
        FusionMethod::ALL.into_iter().map(Self::new).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionParams {
    /// Overrides the learned weights of the global-weight methods.
    pub explicit_weights: Option<Vec<f64>>,
    /// Prompt concepts for content-aware weighting.
    pub prompt_tags: BTreeSet<String>,
    pub seed: u64,
    pub attention_heads: usize,
    pub attention_layers: usize,
    /// Side of the square patches the transformer method describes.
    pub patch: usize,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            explicit_weights: None,
            prompt_tags: BTreeSet::new(),
            seed: 0,
            attention_heads: AttentionParams::DEFAULT_HEADS,
            attention_layers: AttentionParams::DEFAULT_LAYERS,
            patch: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FusionWeights {
    /// One weight per input image.
    Global(Vec<f64>),
    /// `maps[k][y * width + x]`.
    PerPixel { height: usize, width: usize, maps: Vec<Vec<f64>> },
}

impl FusionWeights {
    /// Largest deviation of a weight sum from one.
    pub fn max_simplex_error(&self) -> f64 {
        match self {
            FusionWeights::Global(w) => (w.iter().sum::<f64>() - 1.0).abs(),
            FusionWeights::PerPixel { maps, .. } => (0..maps[0].len())
                .map(|p| (maps.iter().map(|m| m[p]).sum::<f64>() - 1.0).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn all_nonnegative(&self) -> bool {
        match self {
            FusionWeights::Global(w) => w.iter().all(|&v| v >= 0.0),
            FusionWeights::PerPixel { maps, .. } => maps.iter().flatten().all(|&v| v >= 0.0),
        }
    }

    /// Weight of image `k` at pixel `(y, x)`.
    pub fn at(&self, k: usize, y: usize, x: usize) -> f64 {
        match self {
            FusionWeights::Global(w) => w[k],
            FusionWeights::PerPixel { width, maps, .. } => maps[k][y * width + x],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub image: GeneratedImage,
    pub weights: FusionWeights,
}

const STATS_HIDDEN: usize = 16;
const DESCRIPTOR_DIM: usize = 8;
/// Scales patch descriptors before attention so the mixing is not flat.
const DESCRIPTOR_GAIN: f64 = 4.0;

/// Holds the seeded weight networks for a fixed number of inputs so repeated
/// fusions do not rebuild them.
#[derive(Debug, Clone)]
pub struct Fuser {
    choice: FusionChoice,
    params: FusionParams,
    inputs: usize,
    network: Option<Mlp>,
    attention: Option<AttentionParams>,
}

impl Fuser {
    pub fn new(choice: FusionChoice, params: FusionParams, inputs: usize) -> Result<Self> {
        if inputs < 2 {
            return Err(Error::invalid(format!("fusion needs at least 2 images, got {inputs}")));
        }
        let seed = derive_seed(params.seed, &[label("fusion"), label(&choice.label), inputs as u64]);
        let (network, attention) = match choice.method {
            FusionMethod::WeightedAverage | FusionMethod::Attention => (
                Some(Mlp::new(&[6 * inputs, STATS_HIDDEN, inputs], &[Activation::Tanh, Activation::Identity], seed)?),
                None,
            ),
            FusionMethod::DynamicWeight => {
                let mut dims = vec![4 * inputs];
                dims.extend(&choice.dynamic_hidden);
                dims.push(inputs);
                let mut acts = vec![Activation::Relu; choice.dynamic_hidden.len()];
                acts.push(Activation::Identity);
                (Some(Mlp::new(&dims, &acts, seed)?), None)
            }
            FusionMethod::Transformer => (
                None,
                Some(AttentionParams::convex(DESCRIPTOR_DIM, params.attention_heads, params.attention_layers, seed)?),
            ),
            FusionMethod::SimpleAverage | FusionMethod::ContentAware => (None, None),
        };
        Ok(Self { choice, params, inputs, network, attention })
    }

    pub fn choice(&self) -> &FusionChoice {
        &self.choice
    }

    pub fn fuse(&self, images: &[GeneratedImage]) -> Result<FusionOutcome> {
        if images.len() < 2 {
            return Err(Error::invalid(format!("fusion needs at least 2 images, got {}", images.len())));
        }
        if images.len() != self.inputs {
            return Err(Error::invalid(format!(
                "fuser built for {} images, got {}",
                self.inputs,
                images.len()
            )));
        }
        let shape = images[0].pixels.shape();
        if shape.len() != 3 || images.iter().any(|im| im.pixels.shape() != shape) {
            return Err(Error::invalid("fusion inputs must share one H x W x C shape"));
        }
        let (h, w) = (shape[0], shape[1]);
        let weights = if let (Some(explicit), true) = (&self.params.explicit_weights, self.is_global()) {
            FusionWeights::Global(check_explicit(explicit, images.len())?)
        } else {
            match self.choice.method {
                FusionMethod::SimpleAverage => FusionWeights::Global(vec![1.0 / images.len() as f64; images.len()]),
                FusionMethod::WeightedAverage => {
                    let raw = self.network().predict(&channel_stats(images))?;
                    FusionWeights::Global(normalize_softplus(&raw))
                }
                FusionMethod::Attention => {
                    FusionWeights::Global(softmax(&self.network().predict(&channel_stats(images))?, 1.0)?)
                }
                FusionMethod::DynamicWeight => {
                    FusionWeights::Global(softmax(&self.network().predict(&quality_stats(images))?, 1.0)?)
                }
                FusionMethod::ContentAware => FusionWeights::Global(content_weights(images, &self.params.prompt_tags)),
                FusionMethod::Transformer => self.transformer_weights(images, h, w)?,
            }
        };
        let pixels = if self.choice.method == FusionMethod::SimpleAverage && self.params.explicit_weights.is_none() {
            simple_average(images)
        } else {
            blend(images, &weights)
        };
        let concept_tags = images.iter().flat_map(|im| im.concept_tags.iter().cloned()).collect();
        let image = GeneratedImage {
            pixels,
            concept_tags,
            provenance: Provenance {
                agent: format!("fusion-{}", self.choice.label),
                seed: self.params.seed,
                prompt_hash: images[0].provenance.prompt_hash,
            },
        };
        Ok(FusionOutcome { image, weights })
    }

    fn is_global(&self) -> bool {
        self.choice.method != FusionMethod::Transformer
    }

    fn network(&self) -> &Mlp {
        self.network.as_ref().expect("network built for this method")
    }

    fn transformer_weights(&self, images: &[GeneratedImage], h: usize, w: usize) -> Result<FusionWeights> {
        let attention = self.attention.as_ref().expect("attention built for transformer");
        let patch = self.params.patch.max(1);
        let (gy, gx) = (h.div_ceil(patch), w.div_ceil(patch));
        let mut grid = vec![vec![0.0; images.len()]; gy * gx];
        for py in 0..gy {
            for px in 0..gx {
                let tokens: Vec<Vec<f64>> = images
                    .iter()
                    .map(|im| patch_descriptor(&im.pixels, py * patch, px * patch, patch))
                    .collect();
                let query: Vec<f64> = (0..DESCRIPTOR_DIM)
                    .map(|c| tokens.iter().map(|t| t[c]).sum::<f64>() / tokens.len() as f64)
                    .collect();
                let out = multi_head_attention(attention, &[query], &tokens, &tokens)?;
                grid[py * gx + px] = out.final_mixing().swap_remove(0);
            }
        }
        // Bilinear interpolation between patch centres keeps rows convex.
        let mut maps = vec![vec![0.0; h * w]; images.len()];
        for y in 0..h {
            let (y0, y1, ty) = interp_coord(y, patch, gy);
            for x in 0..w {
                let (x0, x1, tx) = interp_coord(x, patch, gx);
                for (k, map) in maps.iter_mut().enumerate() {
                    let top = grid[y0 * gx + x0][k] * (1.0 - tx) + grid[y0 * gx + x1][k] * tx;
                    let bottom = grid[y1 * gx + x0][k] * (1.0 - tx) + grid[y1 * gx + x1][k] * tx;
                    map[y * w + x] = top * (1.0 - ty) + bottom * ty;
                }
            }
        }
        Ok(FusionWeights::PerPixel { height: h, width: w, maps })
    }
}

/// Fuses `images` with a freshly built [`Fuser`].
pub fn fuse(images: &[GeneratedImage], choice: &FusionChoice, params: &FusionParams) -> Result<FusionOutcome> {
    Fuser::new(choice.clone(), params.clone(), images.len())?.fuse(images)
}

fn check_explicit(weights: &[f64], n: usize) -> Result<Vec<f64>> {
    if weights.len() != n {
        return Err(Error::invalid(format!("{} explicit weights for {n} images", weights.len())));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("explicit fusion weights must be nonnegative and sum to 1"));
    }
    Ok(weights.to_vec())
}

fn interp_coord(i: usize, patch: usize, cells: usize) -> (usize, usize, f64) {
    let pos = (i as f64 + 0.5) / patch as f64 - 0.5;
    if pos <= 0.0 {
        return (0, 0, 0.0);
    }
    let lo = pos.floor() as usize;
    if lo + 1 >= cells {
        return (cells - 1, cells - 1, 0.0);
    }
    (lo, lo + 1, pos - lo as f64)
}

fn normalize_softplus(raw: &[f64]) -> Vec<f64> {
    let sp: Vec<f64> = raw.iter().map(|&r| if r > 30.0 { r } else { r.exp().ln_1p() }).collect();
    let total: f64 = sp.iter().sum();
    sp.iter().map(|s| s / total).collect()
}

fn content_weights(images: &[GeneratedImage], prompt: &BTreeSet<String>) -> Vec<f64> {
    let overlaps: Vec<f64> = images
        .iter()
        .map(|im| im.concept_tags.intersection(prompt).count() as f64)
        .collect();
    let total: f64 = overlaps.iter().sum();
    if total == 0.0 {
        return vec![1.0 / images.len() as f64; images.len()];
    }
    overlaps.iter().map(|o| o / total).collect()
}

/// Per image: channel means then channel standard deviations.
fn channel_stats(images: &[GeneratedImage]) -> Vec<f64> {
    let mut out = vec![];
    for im in images {
        let c = im.pixels.shape()[2];
        let n = (im.pixels.len() / c) as f64;
        let mut sum = vec![0.0; c];
        let mut sq = vec![0.0; c];
        for px in im.pixels.data().chunks_exact(c) {
            for (ch, v) in px.iter().enumerate() {
                sum[ch] += v;
                sq[ch] += v * v;
            }
        }
        let means: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let stds: Vec<f64> = sq.iter().zip(&means).map(|(s, m)| (s / n - m * m).max(0.0).sqrt()).collect();
        out.extend(means.iter().take(3));
        out.extend(std::iter::repeat_n(0.0, 3usize.saturating_sub(c)));
        out.extend(stds.iter().take(3));
        out.extend(std::iter::repeat_n(0.0, 3usize.saturating_sub(c)));
    }
    out
}

/// Per image: quality, contrast, sharpness and mean luminance.
fn quality_stats(images: &[GeneratedImage]) -> Vec<f64> {
    images
        .iter()
        .flat_map(|im| {
            let q = QualityBreakdown::of(&im.pixels);
            [q.score(), q.contrast, q.sharpness, q.mean_luminance]
        })
        .collect()
}

fn patch_descriptor(image: &Tensor, y0: usize, x0: usize, patch: usize) -> Vec<f64> {
    let s = image.shape();
    let (y1, x1) = ((y0 + patch).min(s[0]), (x0 + patch).min(s[1]));
    let c = s[2].min(3);
    let n = ((y1 - y0) * (x1 - x0)) as f64;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    let mut grad = 0.0;
    let mut lum = 0.0;
    for y in y0..y1 {
        for x in x0..x1 {
            for ch in 0..c {
                let v = image.at3(y, x, ch);
                sum[ch] += v;
                sq[ch] += v * v;
            }
            lum += luminance(image, y, x);
            grad += gradient_magnitude(image, y, x, 0);
        }
    }
    let mut d = Vec::with_capacity(DESCRIPTOR_DIM);
    for ch in 0..3 {
        d.push(sum[ch] / n);
    }
    for ch in 0..3 {
        let m = sum[ch] / n;
        d.push((sq[ch] / n - m * m).max(0.0).sqrt());
    }
    d.push(grad / n);
    d.push(lum / n);
    d.iter().map(|v| v * DESCRIPTOR_GAIN).collect()
}

fn envelope(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Mean of sorted per-pixel values, so input order cannot change the result.
fn simple_average(images: &[GeneratedImage]) -> Tensor {
    let shape = images[0].pixels.shape().to_vec();
    let k = images.len() as f64;
    let mut buf = vec![0.0; images.len()];
    Tensor::from_fn(shape, |i| {
        for (b, im) in buf.iter_mut().zip(images) {
            *b = im.pixels.data()[i];
        }
        buf.sort_by(f64::total_cmp);
        let (lo, hi) = envelope(&buf);
        (buf.iter().sum::<f64>() / k).clamp(lo, hi)
    })
}

fn blend(images: &[GeneratedImage], weights: &FusionWeights) -> Tensor {
    let shape = images[0].pixels.shape().to_vec();
    let (w, c) = (shape[1], shape[2]);
    let mut buf = vec![0.0; images.len()];
    Tensor::from_fn(shape, |i| {
        let (y, x) = (i / c / w, (i / c) % w);
        let mut acc = 0.0;
        for (k, (b, im)) in buf.iter_mut().zip(images).enumerate() {
            *b = im.pixels.data()[i];
            acc += weights.at(k, y, x) * *b;
        }
        let (lo, hi) = envelope(&buf);
        acc.clamp(lo, hi)
    })
}

fn luminance(image: &Tensor, y: usize, x: usize) -> f64 {
    if image.shape()[2] >= 3 {
        0.299 * image.at3(y, x, 0) + 0.587 * image.at3(y, x, 1) + 0.114 * image.at3(y, x, 2)
    } else {
        image.at3(y, x, 0)
    }
}

/// Cap on luminance standard deviation; a 0/1 checkerboard reaches it.
pub const CONTRAST_CAP: f64 = 0.5;
/// Cap on mean luminance gradient magnitude (already divided by sqrt 2).
pub const SHARPNESS_CAP: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityBreakdown {
    pub contrast: f64,
    pub sharpness: f64,
    pub mean_luminance: f64,
}

impl QualityBreakdown {
    pub fn of(pixels: &Tensor) -> Self {
        let s = pixels.shape();
        let (h, w) = (s[0], s[1]);
        let lum: Vec<f64> = (0..h * w).map(|i| luminance(pixels, i / w, i % w)).collect();
        let n = lum.len() as f64;
        let mean = lum.iter().sum::<f64>() / n;
        let var = lum.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
        let mut grad = 0.0;
        let mut count = 0usize;
        for y in 0..h.saturating_sub(1) {
            for x in 0..w.saturating_sub(1) {
                let v = lum[y * w + x];
                let dx = lum[y * w + x + 1] - v;
                let dy = lum[(y + 1) * w + x] - v;
                grad += ((dx * dx + dy * dy) / 2.0).sqrt();
                count += 1;
            }
        }
        let sharp = if count == 0 { 0.0 } else { grad / count as f64 };
        Self {
            contrast: (var.sqrt() / CONTRAST_CAP).min(1.0),
            sharpness: (sharp / SHARPNESS_CAP).min(1.0),
            mean_luminance: mean,
        }
    }

    pub fn score(&self) -> f64 {
        0.5 * self.contrast + 0.5 * self.sharpness
    }
}

/// Half normalized luminance contrast plus half normalized sharpness.
pub fn image_quality_score(image: &GeneratedImage) -> f64 {
    QualityBreakdown::of(&image.pixels).score()
}

/// Mean absolute pixel difference over all unordered pairs; in `[0,1]`.
pub fn mean_pairwise_distance(images: &[GeneratedImage]) -> Result<f64> {
    if images.len() < 2 {
        return Ok(0.0);
    }
    let shape = images[0].pixels.shape();
    if images.iter().any(|im| im.pixels.shape() != shape) {
        return Err(Error::invalid("images differ in shape"));
    }
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let a = images[i].pixels.data();
            let b = images[j].pixels.data();
            total += a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallWeighting {
    pub quality: f64,
    pub similarity: f64,
}

impl Default for OverallWeighting {
    fn default() -> Self {
        Self { quality: 0.5, similarity: 0.5 }
    }
}

impl OverallWeighting {
    /// 40% quality, 60% similarity.
    pub fn similarity_heavy() -> Self {
        Self { quality: 0.4, similarity: 0.6 }
    }
}

pub fn overall_score(quality: f64, similarity: f64, weighting: OverallWeighting) -> Result<f64> {
    let OverallWeighting { quality: wq, similarity: ws } = weighting;
    if !(wq >= 0.0 && ws >= 0.0) || (wq + ws - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("overall weighting ({wq}, {ws}) is not a convex pair")));
    }
    Ok(wq * quality + ws * similarity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub method: String,
    pub quality: f64,
    pub similarity: f64,
    pub overall: f64,
    pub elapsed_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FusionReport {
    pub const CSV_HEADER: &'static str = "Method,Quality,Similarity,Overall,TimeSeconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.6},{:.6},{:.6}",
            self.method, self.quality, self.similarity, self.overall, self.elapsed_seconds
        )
    }
}

/// Runs each fusion choice, scoring quality with [`image_quality_score`] and
/// similarity with `similarity`. Timing wraps only the fusion call. Failures
/// are reported per method without stopping the batch. Reports come back in
/// method order.
pub fn benchmark_fusion(
    images: &[GeneratedImage],
    choices: &[FusionChoice],
    params: &FusionParams,
    weighting: OverallWeighting,
    mut similarity: impl FnMut(&GeneratedImage) -> Result<f64>,
) -> Result<Vec<FusionReport>> {
    if choices.is_empty() {
        return Err(Error::invalid("no fusion methods to benchmark"));
    }
    let mut ordered: Vec<&FusionChoice> = choices.iter().collect();
    ordered.sort_by(|a, b| (a.method, &a.label).cmp(&(b.method, &b.label)));
    let mut reports = Vec::with_capacity(ordered.len());
    for choice in ordered {
        let fused = Fuser::new(choice.clone(), params.clone(), images.len()).and_then(|f| {
            let start = Instant::now();
            let out = f.fuse(images)?;
            Ok((out, start.elapsed().as_secs_f64()))
        });
        let report = fused.and_then(|(out, elapsed)| {
            let quality = image_quality_score(&out.image);
            let sim = similarity(&out.image)?;
            Ok(FusionReport {
                method: choice.label.clone(),
                quality,
                similarity: sim,
                overall: overall_score(quality, sim, weighting)?,
                elapsed_seconds: elapsed,
                error: None,
            })
        });
        reports.push(report.unwrap_or_else(|e| FusionReport {
            method: choice.label.clone(),
            quality: f64::NAN,
            similarity: f64::NAN,
            overall: f64::NAN,
            elapsed_seconds: 0.0,
            error: Some(e.to_string()),
        }));
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(pixels: Tensor, tags: &[&str]) -> GeneratedImage {
        GeneratedImage {
            pixels,
            concept_tags: tags.iter().map(|s| s.to_string()).collect(),
            provenance: Provenance { agent: "test".into(), seed: 0, prompt_hash: 0 },
        }
    }

    #[test]
    fn checkerboard_saturates_quality() {
        let t = Tensor::from_fn(vec![16, 16, 3], |i| {
            let p = i / 3;
            ((p / 16 + p % 16) % 2) as f64
        });
        assert!((image_quality_score(&img(t, &[])) - 1.0).abs() < 1e-12);
        assert!(image_quality_score(&img(Tensor::filled(vec![16, 16, 3], 0.3), &[])) < 1e-12);
    }

    #[test]
    fn overall_fixtures() {
        let w = OverallWeighting::default();
        assert_eq!(overall_score(1.0, 1.0, w).unwrap(), 1.0);
        assert_eq!(overall_score(1.0, 1.0, OverallWeighting::similarity_heavy()).unwrap(), 1.0);
        assert!(overall_score(0.5, 0.5, OverallWeighting { quality: 0.7, similarity: 0.7 }).is_err());
    }

    #[test]
    fn parses_methods_and_alias() {
        let n = FusionChoice::parse("neural").unwrap();
        assert_eq!(n.method, FusionMethod::DynamicWeight);
        assert_eq!(n.dynamic_hidden, NEURAL_HIDDEN.to_vec());
        assert!(FusionChoice::parse("cyclic").is_err());
        assert_eq!(FusionChoice::parse_list("transformer, simple_average").unwrap().len(), 2);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = img(Tensor::zeros(vec![8, 8, 3]), &[]);
        let b = img(Tensor::zeros(vec![8, 9, 3]), &[]);
        let choice = FusionChoice::new(FusionMethod::SimpleAverage);
        assert!(fuse(std::slice::from_ref(&a), &choice, &FusionParams::default()).is_err());
        assert!(fuse(&[a, b], &choice, &FusionParams::default()).is_err());
    }

    #[test]
    fn content_aware_follows_tag_overlap() {
        let a = img(Tensor::filled(vec![8, 8, 3], 0.2), &["castle", "tower"]);
        let b = img(Tensor::filled(vec![8, 8, 3], 0.8), &["lake"]);
        let params = FusionParams { prompt_tags: ["castle".to_string()].into(), ..Default::default() };
        let out = fuse(&[a.clone(), b], &FusionChoice::new(FusionMethod::ContentAware), &params).unwrap();
        assert_eq!(out.weights, FusionWeights::Global(vec![1.0, 0.0]));
        assert_eq!(out.image.pixels, a.pixels);
        assert_eq!(out.image.concept_tags.len(), 3);
    }

    #[test]
    fn interpolation_coordinates() {
        assert_eq!(interp_coord(0, 8, 8), (0, 0, 0.0));
        assert_eq!(interp_coord(63, 8, 8), (7, 7, 0.0));
        let (a, b, t) = interp_coord(12, 8, 8);
        assert_eq!((a, b), (1, 2));
        assert!((t - 0.0625).abs() < 1e-12);
    }
}
