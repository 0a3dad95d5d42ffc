//! PPO training for text and image agents: rewards, advantages, the clipped
//! surrogate and the update loop.

mod env;
mod ppo;
mod train;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text_metrics::RewardWeights;

pub use env::{
    ArmBandit, CoordinationBandit, EnvStep, Environment, ImageLatentEnv, ImageScore, TextEnhanceEnv, TextScenario,
    IMAGE_ACTIONS, LATENT_STEP, PERTURBED_DIMS,
};
pub use ppo::{
    policy_gradient, policy_objective, ppo_update, value_loss, ActorCritic, Adam, Optimizer, PolicyGradient,
    UpdateStats,
};
pub use train::{train_agents, train_until, TrainLogRecord, TrainMode, TrainOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardPreset {
    /// 0.4 BLEU + 0.3 ROUGE + 0.2 coherence + 0.1 diversity.
    TextEq2,
    /// 0.5 similarity + 0.3 quality + 0.2 diversity.
    ImageSqd,
}

impl RewardPreset {
    pub fn weights(self) -> RewardWeights {
        match self {
            RewardPreset::TextEq2 => RewardWeights::text_default(),
            RewardPreset::ImageSqd => RewardWeights::similarity_quality_diversity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AdvantageMode {
    OneStepTd,
    Gae { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PPOConfig {
    pub clip_epsilon: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub advantage: AdvantageMode,
    pub batch_size: usize,
    pub epochs_per_batch: usize,
    pub reward_preset: RewardPreset,
    pub optimizer: OptimizerKind,
}

impl Default for PPOConfig {
    fn default() -> Self {
        Self {
            clip_epsilon: 0.2,
            gamma: 0.99,
            learning_rate: 3e-4,
            advantage: AdvantageMode::Gae { lambda: 0.95 },
            batch_size: 32,
            epochs_per_batch: 10,
            reward_preset: RewardPreset::TextEq2,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl PPOConfig {
    pub const PRESETS: [&'static str; 3] = ["standard", "low_lr", "small_batch"];

    /// `standard`: lr 3e-4, batch 32. `low_lr`: lr 5e-5, batch 16.
    /// `small_batch`: lr 3e-4, batch 8.
    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::default();
        let cfg = match name {
            "standard" => base,
            "low_lr" => Self { learning_rate: 5e-5, batch_size: 16, ..base },
            "small_batch" => Self { batch_size: 8, ..base },
            _ => return Err(Error::config(format!("unknown PPO preset {name:?}"))),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0) {
            return Err(Error::config("clip epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("discount must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if let AdvantageMode::Gae { lambda } = self.advantage {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::config("GAE lambda must lie in [0, 1]"));
            }
        }
        if self.batch_size == 0 || self.epochs_per_batch == 0 {
            return Err(Error::config("batch size and epochs must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    /// Allowed actions; empty means all are allowed.
    pub mask: Vec<bool>,
    pub action: usize,
    pub old_log_prob: f64,
    pub reward: f64,
    pub value: f64,
    pub next_value: f64,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    pub episode_return: f64,
}

impl Trajectory {
    pub fn new(transitions: Vec<Transition>, gamma: f64) -> Self {
        let episode_return = transitions.iter().rev().fold(0.0, |acc, t| t.reward + gamma * acc);
        Self { transitions, episode_return }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    OneStepTd,
    Gae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub values: Vec<f64>,
    pub estimator: Estimator,
}

fn td_error(t: &Transition, gamma: f64) -> f64 {
    let next = if t.terminal { 0.0 } else { t.next_value };
    t.reward + gamma * next - t.value
}

pub fn compute_advantage(trajectory: &Trajectory, config: &PPOConfig) -> Result<AdvantageEstimate> {
    let ts = &trajectory.transitions;
    if ts.is_empty() {
        return Err(Error::EmptyInput("trajectory has no transitions".into()));
    }
    let gamma = config.gamma;
    let (values, estimator) = match config.advantage {
        AdvantageMode::OneStepTd => (ts.iter().map(|t| td_error(t, gamma)).collect(), Estimator::OneStepTd),
        AdvantageMode::Gae { lambda } => {
            let mut out = vec![0.0; ts.len()];
            let mut acc = 0.0;
            for i in (0..ts.len()).rev() {
                if ts[i].terminal {
                    acc = 0.0;
                }
                acc = td_error(&ts[i], gamma) + gamma * lambda * acc;
                out[i] = acc;
            }
            (out, Estimator::Gae)
        }
    };
    if values.iter().any(|v: &f64| !v.is_finite()) {
        return Err(Error::numeric("advantage estimate is not finite"));
    }
    Ok(AdvantageEstimate { values, estimator })
}

/// `min(ρA, clip(ρ, 1-ε, 1+ε)A)` with `ρ = exp(new - old)`.
pub fn clipped_objective(new_log_prob: f64, old_log_prob: f64, advantage: f64, epsilon: f64) -> f64 {
    let ratio = (new_log_prob - old_log_prob).exp();
    let clipped = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Named metric values for one reward evaluation.
pub type RewardSample = BTreeMap<String, f64>;

pub fn compute_reward(sample: &RewardSample, preset: RewardPreset) -> Result<f64> {
    preset.weights().combine(|k| sample.get(k).copied())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(reward: f64, value: f64, next_value: f64, terminal: bool) -> Transition {
        Transition {
            state: vec![],
            mask: vec![],
            action: 0,
            old_log_prob: 0.0,
            reward,
            value,
            next_value,
            terminal,
        }
    }

    #[test]
    fn clip_fixtures() {
        assert_eq!(clipped_objective(0.0, 0.0, 0.7, 0.2), 0.7);
        assert_eq!(clipped_objective(2f64.ln(), 0.0, 1.0, 0.2), 1.2);
        assert_eq!(clipped_objective(0.5f64.ln(), 0.0, -1.0, 0.2), -0.8);
    }

    #[test]
    fn one_step_advantage() {
        let traj = Trajectory::new(vec![t(1.0, 0.0, 0.0, true)], 0.99);
        let cfg = PPOConfig { advantage: AdvantageMode::OneStepTd, ..Default::default() };
        assert_eq!(compute_advantage(&traj, &cfg).unwrap().values, vec![1.0]);
        assert!(compute_advantage(&Trajectory::new(vec![], 0.9), &cfg).is_err());
    }

    #[test]
    fn reward_presets() {
        let mut s = RewardSample::new();
        for (k, v) in [("bleu", 1.0), ("rouge", 0.8), ("coherence", 0.5), ("diversity", 0.2)] {
            s.insert(k.into(), v);
        }
        assert!((compute_reward(&s, RewardPreset::TextEq2).unwrap() - 0.76).abs() < 1e-12);
        assert!(matches!(compute_reward(&s, RewardPreset::ImageSqd), Err(Error::InvalidArgument(_))));
        let ones: RewardSample = ["similarity", "quality", "diversity"].iter().map(|k| (k.to_string(), 1.0)).collect();
        assert!((compute_reward(&ones, RewardPreset::ImageSqd).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn presets_validate() {
        for p in PPOConfig::PRESETS {
            PPOConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(PPOConfig::preset("huge").is_err());
        assert!(PPOConfig { gamma: 1.0, ..Default::default() }.validate().is_err());
    }
}
