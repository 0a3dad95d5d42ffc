use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ScenarioSuite;
use crate::error::{Error, Result};
use crate::fusion::FusionChoice;
use crate::rl::PPOConfig;

pub const SCHEMA_VERSION: u32 = 1;
/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "AGENTFUSE_OUT";

/// Low-rank adapter settings of the original fine-tuning setup. Kept in the
/// config for the record; nothing here fine-tunes a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub rank: usize,
    pub alpha: f64,
    pub dropout: f64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self { rank: 8, alpha: 32.0, dropout: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: u8,
    pub seed: u64,
    /// Where the scenarios came from, for the record.
    pub scenario_source: String,
    pub scenarios: ScenarioSuite,
    pub image_size: usize,
    pub fusion: Vec<FusionChoice>,
    /// Fusion used wherever a single fused image is needed.
    pub pipeline_fusion: FusionChoice,
    pub ppo_preset: String,
    pub ppo: PPOConfig,
    pub text_max_steps: usize,
    pub rl_iterations: usize,
    /// Unused by any computation.
    #[serde(default)]
    pub adapter: AdapterConfig,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: u8, seed: u64, scenarios: ScenarioSuite) -> Result<Self> {
        let cfg = Self {
            experiment,
            seed,
            scenario_source: "paper5".into(),
            scenarios,
            image_size: 64,
            fusion: FusionChoice::all(),
            pipeline_fusion: FusionChoice::parse("dynamic_weight")?,
            ppo_preset: "standard".into(),
            ppo: PPOConfig::default(),
            text_max_steps: 12,
            rl_iterations: 20,
            adapter: AdapterConfig::default(),
            out_dir: default_out_dir(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.experiment) {
            return Err(Error::config(format!("experiment must be 1-6, got {}", self.experiment)));
        }
        if self.image_size < 8 {
            return Err(Error::config("image size must be at least 8"));
        }
        if self.fusion.is_empty() {
            return Err(Error::config("no fusion methods configured"));
        }
        if self.text_max_steps == 0 {
            return Err(Error::config("text_max_steps must be positive"));
        }
        self.ppo.validate()
    }

    /// SHA-256 over the canonical JSON of every field except the output
    /// directory.
    pub fn digest(&self) -> String {
        let mut view = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = view.as_object_mut() {
            map.remove("out_dir");
        }
        hex::encode(Sha256::digest(view.to_string().as_bytes()))
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs/latest"))
}

/// Every metric name a record may carry.
pub const METRIC_KEYS: [&str; 18] = [
    "bleu",
    "rouge1_f1",
    "coherence",
    "diversity",
    "word_count",
    "text_reward",
    "similarity",
    "quality",
    "image_diversity",
    "image_reward",
    "overall",
    "consistency",
    "contrastive_loss",
    "cos_sim",
    "obj_valid",
    "clip_similarity",
    "concept_coverage",
    "semantic_alignment",
];

const TEXT_METRICS: [&str; 6] = ["bleu", "rouge1_f1", "coherence", "diversity", "word_count", "text_reward"];
const IMAGE_METRICS: [&str; 5] = ["similarity", "quality", "image_diversity", "overall", "image_reward"];
const FUSION_METRICS: [&str; 3] = ["quality", "similarity", "overall"];
const CONSISTENCY_METRICS: [&str; 7] = [
    "consistency",
    "contrastive_loss",
    "cos_sim",
    "obj_valid",
    "clip_similarity",
    "concept_coverage",
    "semantic_alignment",
];

/// Metric columns of an experiment, in CSV order.
pub fn experiment_metrics(experiment: u8) -> &'static [&'static str] {
    match experiment {
        1 | 2 => &TEXT_METRICS,
        3 | 4 => &IMAGE_METRICS,
        5 => &FUSION_METRICS,
        _ => &CONSISTENCY_METRICS,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: u8,
    pub scenario: String,
    /// `single_agent`, `multi_agent`, `before_rl`, `after_rl`, a fusion
    /// method label or an integration direction.
    pub condition: String,
    pub metrics: BTreeMap<String, f64>,
    pub elapsed_seconds: f64,
    pub seed: u64,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(
        config: &ExperimentConfig,
        scenario: &str,
        condition: &str,
        metrics: BTreeMap<String, f64>,
        elapsed_seconds: f64,
    ) -> Result<Self> {
        if let Some(k) = metrics.keys().find(|k| !METRIC_KEYS.contains(&k.as_str())) {
            return Err(Error::invalid(format!("metric {k:?} is not registered")));
        }
        Ok(Self {
            experiment: config.experiment,
            scenario: scenario.into(),
            condition: condition.into(),
            metrics,
            elapsed_seconds,
            seed: config.seed,
            config_digest: config.digest(),
            error: None,
        })
    }

    pub fn failed(config: &ExperimentConfig, scenario: &str, condition: &str, error: &crate::Error) -> Self {
        Self {
            experiment: config.experiment,
            scenario: scenario.into(),
            condition: condition.into(),
            metrics: BTreeMap::new(),
            elapsed_seconds: 0.0,
            seed: config.seed,
            config_digest: config.digest(),
            error: Some(error.to_string()),
        }
    }
}

pub fn metric_map<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> BTreeMap<String, f64> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
