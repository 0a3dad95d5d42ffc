//! Domain-specialized text and image agents.

mod image;
mod lexicon;
mod text;

use serde::{Deserialize, Serialize};

pub use image::{
    generate_image, route_features, AgentLatent, GeneratedImage, ImageAgentSpec, ImageAgentTeam, Provenance,
    RenderConfig, LATENT_DIM,
};
pub use lexicon::{Lexicon, LexiconEntry};
pub use text::{
    enhance_text, multi_agent_enhance, rollout_text, sample_log_probs, DomainRouting, Enhanced, Sampling, TextAgentSpec,
    TextAgentTeam, TextEpisode, TextRole, TextStep,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Architecture,
    Portrait,
    Landscape,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Architecture, Domain::Portrait, Domain::Landscape];

    pub fn name(self) -> &'static str {
        match self {
            Domain::Architecture => "architecture",
            Domain::Portrait => "portrait",
            Domain::Landscape => "landscape",
        }
    }

    pub fn parse(name: &str) -> crate::Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| crate::Error::config(format!("unknown domain {name:?}")))
    }

    /// Tags every image of this domain carries regardless of prompt.
    pub fn base_tags(self) -> &'static [&'static str] {
        match self {
            Domain::Architecture => &["architecture", "building"],
            Domain::Portrait => &["portrait", "person"],
            Domain::Landscape => &["landscape", "horizon"],
        }
    }
}
