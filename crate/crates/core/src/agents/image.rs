use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use super::text::TextRole;
use super::Domain;
use crate::embeddings::TEXT_DIM;
use crate::error::{Error, Result};
use crate::numerics::{l2_norm, Activation, Mlp, Tensor};
use crate::rng::{derive_seed, label};

pub const LATENT_DIM: usize = 32;
/// Steepness of the latent-to-pattern-parameter squashing.
const LATENT_GAIN: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub height: usize,
    pub width: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { height: 64, width: 64 }
    }
}

impl RenderConfig {
    pub fn square(size: usize) -> Self {
        Self { height: size, width: size }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageAgentSpec {
    pub domain: Domain,
    /// Maps 768-d text features to the agent latent.
    pub specialized_layer: Mlp,
    pub render: RenderConfig,
    /// Concepts this agent can depict beyond its base tags.
    pub lexicon_tags: BTreeSet<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLatent {
    pub vector: Vec<f64>,
    pub agent: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub agent: String,
    pub seed: u64,
    pub prompt_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedImage {
    /// `H x W x 3`, values in `[0,1]`.
    pub pixels: Tensor,
    pub concept_tags: BTreeSet<String>,
    pub provenance: Provenance,
}

impl GeneratedImage {
    pub fn shape(&self) -> (usize, usize, usize) {
        let s = self.pixels.shape();
        (s[0], s[1], s[2])
    }
}

impl ImageAgentSpec {
    pub fn new(domain: Domain, render: RenderConfig, lexicon_tags: BTreeSet<String>, seed: u64) -> Result<Self> {
        if render.height < 8 || render.width < 8 {
            return Err(Error::config("images must be at least 8x8"));
        }
        let specialized_layer = Mlp::new(&[TEXT_DIM, LATENT_DIM], &[Activation::Identity], seed)?;
        Ok(Self { domain, specialized_layer, render, lexicon_tags, seed })
    }

    pub fn builtin(domain: Domain, render: RenderConfig, root_seed: u64) -> Result<Self> {
        let seed = derive_seed(root_seed, &[label("image-agent"), label(domain.name())]);
        let role = match domain {
            Domain::Architecture => TextRole::Architecture,
            Domain::Portrait => TextRole::Portrait,
            Domain::Landscape => TextRole::Landscape,
        };
        Self::new(domain, render, role.builtin_lexicon().tags(), seed)
    }

    pub fn id(&self) -> String {
        format!("image-{}", self.domain.name())
    }
}

/// `z_a`: the agent's specialized layer applied to unit-norm text features.
pub fn route_features(agent: &ImageAgentSpec, text_features: &[f64]) -> Result<AgentLatent> {
    if text_features.len() != agent.specialized_layer.in_dim() {
        return Err(Error::invalid(format!(
            "agent expects {} text features, got {}",
            agent.specialized_layer.in_dim(),
            text_features.len()
        )));
    }
    let norm = l2_norm(text_features);
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("text features must be unit norm, got {norm}")));
    }
    let vector = agent.specialized_layer.predict(text_features)?;
    Ok(AgentLatent { vector, agent: agent.id() })
}

fn tag_hash(tags: &BTreeSet<String>) -> u64 {
    let mut h = fnv::FnvHasher::default();
    for t in tags {
        h.write(t.as_bytes());
        h.write_u8(0);
    }
    h.finish()
}

/// Renders the domain's procedural pattern, parameterized by the latent.
pub fn generate_image(agent: &ImageAgentSpec, latent: &AgentLatent, prompt_tags: &BTreeSet<String>) -> Result<GeneratedImage> {
    if latent.vector.is_empty() {
        return Err(Error::invalid("empty latent"));
    }
    if latent.vector.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("latent has a non-finite entry"));
    }
    let params: Vec<f64> = (0..LATENT_DIM)
        .map(|k| 0.5 + 0.5 * (LATENT_GAIN * latent.vector[k % latent.vector.len()]).tanh())
        .collect();
    let RenderConfig { height, width } = agent.render;
    let pixels = Tensor::from_fn(vec![height, width, 3], |_| 0.0);
    let mut pixels = pixels;
    for y in 0..height {
        for x in 0..width {
            let rgb = match agent.domain {
                Domain::Architecture => architecture_pixel(&params, x, y, width, height),
                Domain::Portrait => portrait_pixel(&params, x, y, width, height),
                Domain::Landscape => landscape_pixel(&params, x, y, width, height),
            };
            for (c, v) in rgb.into_iter().enumerate() {
                pixels.set3(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
    let mut concept_tags: BTreeSet<String> = agent.domain.base_tags().iter().map(|t| t.to_string()).collect();
    concept_tags.extend(prompt_tags.intersection(&agent.lexicon_tags).cloned());
    Ok(GeneratedImage {
        pixels,
        concept_tags,
        provenance: Provenance { agent: agent.id(), seed: agent.seed, prompt_hash: tag_hash(prompt_tags) },
    })
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Sky gradient, three rectilinear blocks with window grids and dark outlines.
fn architecture_pixel(p: &[f64], x: usize, y: usize, w: usize, h: usize) -> [f64; 3] {
    let (u, v) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
    let ground = 0.75 + 0.1 * (p[3] - 0.5);
    if v >= ground {
        let g = 0.25 + 0.2 * p[16];
        return scale([g, g * 0.9, g * 0.8], 1.0 - 0.3 * (v - ground));
    }
    let stone = 0.35 + 0.4 * p[13];
    let period = 4 + (4.0 * p[14]).round() as usize;
    for i in 0..3 {
        let cx = (i as f64 + 0.5) / 3.0 + 0.15 * (p[4 + i] - 0.5);
        let half = 0.075 + 0.075 * p[7 + i];
        let top = ground - (0.3 + 0.4 * p[10 + i]);
        if (u - cx).abs() <= half && v >= top {
            let (left, top_px) = (((cx - half) * w as f64).max(0.0) as usize, (top * h as f64).max(0.0) as usize);
            let right = ((cx + half) * w as f64).min(w as f64 - 1.0) as usize;
            let edge = x <= left || x >= right || y <= top_px;
            if edge {
                return scale([stone, stone * 0.95, stone * 0.9], 0.5);
            }
            let (lx, ly) = (x - left, y - top_px);
            if (lx / period) % 2 == 1 && (ly / period) % 2 == 1 && lx % period != 0 && ly % period != 0 {
                let lit = 0.9 * (0.7 + 0.3 * p[15]);
                return [lit, lit * 0.85, lit * 0.45];
            }
            return [stone, stone * 0.95, stone * 0.9];
        }
    }
    let top = [0.35 + 0.3 * p[0], 0.5 + 0.3 * p[1], 0.75 + 0.2 * p[2]];
    mix(top, [0.9, 0.85, 0.75], v / ground)
}

/// Radial background, head-and-shoulders figure centred in frame.
fn portrait_pixel(p: &[f64], x: usize, y: usize, w: usize, h: usize) -> [f64; 3] {
    let (u, v) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
    let (cx, cy) = (0.5 + 0.1 * (p[3] - 0.5), 0.45 + 0.1 * (p[4] - 0.5));
    let (rx, ry) = (0.18 + 0.08 * p[5], 0.24 + 0.08 * p[6]);
    let r2 = ((u - cx) / rx).powi(2) + ((v - cy) / ry).powi(2);
    let eye_r = 0.07 * rx;
    for side in [-1.0, 1.0] {
        let (ex, ey) = (cx + side * 0.38 * rx, cy - 0.15 * ry);
        if (u - ex).powi(2) + (v - ey).powi(2) <= eye_r * eye_r {
            return [0.1, 0.08, 0.08];
        }
    }
    if (v - (cy + 0.45 * ry)).abs() < 0.02 && (u - cx).abs() < 0.3 * rx {
        return [0.5, 0.2, 0.2];
    }
    if r2 <= 1.0 {
        let skin = [0.75 + 0.2 * p[10], 0.55 + 0.2 * p[11], 0.45 + 0.2 * p[12]];
        return scale(skin, 1.0 - 0.35 * r2);
    }
    if r2 <= 1.15 * 1.15 && v < cy - 0.35 * ry {
        let hair = 0.3 + 0.6 * p[13];
        return [hair, hair * 0.95, hair * 0.9];
    }
    if ((u - 0.5) / 0.42).powi(2) + ((v - 1.05) / 0.3).powi(2) <= 1.0 {
        return [0.2 + 0.6 * p[7], 0.15 + 0.5 * p[8], 0.2 + 0.6 * p[9]];
    }
    let d = ((u - 0.5).powi(2) + (v - 0.45).powi(2)).sqrt();
    scale([0.2 + 0.5 * p[0], 0.2 + 0.5 * p[1], 0.25 + 0.5 * p[2]], 1.0 - 0.5 * d)
}

/// Horizontal bands: sky gradient, a sinusoidal ridge with snow line, banded ground.
fn landscape_pixel(p: &[f64], x: usize, y: usize, w: usize, h: usize) -> [f64; 3] {
    let (u, v) = ((x as f64 + 0.5) / w as f64, (y as f64 + 0.5) / h as f64);
    let horizon = 0.45 + 0.2 * (p[0] - 0.5);
    if v >= horizon {
        let band_px = 3.0 + 4.0 * p[9];
        let band = (((v - horizon) * h as f64) / band_px).floor() as i64;
        let shade = if band % 2 == 0 { 1.0 } else { 0.85 };
        let depth = 0.7 + 0.3 * (1.0 - (v - horizon) / (1.0 - horizon));
        return scale([0.2 + 0.15 * p[10], 0.45 + 0.2 * p[11], 0.2], shade * depth);
    }
    let amp = 0.1 + 0.12 * p[5];
    let freq = 1.0 + 3.0 * p[6];
    let ridge = horizon - amp * (0.55 + 0.45 * (TAU * freq * u + TAU * p[7]).sin());
    if v >= ridge {
        if v < ridge + 0.02 {
            return [0.95, 0.95, 0.97];
        }
        let rock = 0.35 + 0.2 * p[8];
        let t = (v - ridge) / (horizon - ridge + 1e-9);
        return scale([rock, rock + 0.05, rock + 0.15], 0.8 + 0.2 * t);
    }
    let top = [0.3 + 0.3 * p[1], 0.5 + 0.3 * p[2], 0.85];
    let glow = [0.95, 0.75 + 0.2 * p[3], 0.6 + 0.3 * p[4]];
    mix(top, glow, v / horizon)
}

/// The three image agents, in domain order.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageAgentTeam {
    pub agents: Vec<ImageAgentSpec>,
}

impl ImageAgentTeam {
    pub fn builtin(render: RenderConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            agents: Domain::ALL
                .into_iter()
                .map(|d| ImageAgentSpec::builtin(d, render, seed))
                .collect::<Result<_>>()?,
        })
    }

    pub fn get(&self, domain: Domain) -> &ImageAgentSpec {
        self.agents.iter().find(|a| a.domain == domain).expect("team covers every domain")
    }

    /// One candidate per agent for an enhanced prompt.
    pub fn generate_candidates(&self, prompt: &str) -> Result<Vec<GeneratedImage>> {
        let features = crate::embeddings::embed_text(prompt)?.vector;
        let tags: BTreeSet<String> = crate::embeddings::tokenize(prompt).into_iter().collect();
        self.agents
            .iter()
            .map(|a| generate_image(a, &route_features(a, &features)?, &tags))
            .collect()
    }
}
