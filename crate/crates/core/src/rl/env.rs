use std::collections::BTreeSet;

use rand::Rng;

use super::{compute_reward, ActorCritic, PPOConfig, RewardPreset, RewardSample};
use crate::agents::{generate_image, route_features, GeneratedImage, ImageAgentSpec, TextAgentSpec};
use crate::consistency::ConsistencyAssessor;
use crate::embeddings::{embed_text, tokenize};
use crate::error::{Error, Result};
use crate::fusion::{image_quality_score, mean_pairwise_distance};
use crate::rng::{derive_seed, label, DetRng};
use crate::text_metrics::{text_reward, RewardWeights, TextMetricReport};

/// One decision of an episode, before values are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub state: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob: f64,
    pub reward: f64,
}

/// A rollout generator for one or more agents. Episodes only read the team,
/// so every agent in an iteration can roll out against the same snapshot.
pub trait Environment {
    fn agent_ids(&self) -> Vec<String>;
    fn build_agents(&self, seed: u64, config: &PPOConfig) -> Result<Vec<ActorCritic>>;
    fn episode(&self, agent: usize, team: &[ActorCritic], rng: &mut DetRng) -> Result<Vec<EnvStep>>;
}

fn agent_seed(seed: u64, id: &str) -> u64 {
    derive_seed(seed, &[label("rl-agent"), label(id)])
}

/// Single-agent bandit with deterministic arm rewards and a constant state.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmBandit {
    pub rewards: Vec<f64>,
}

impl ArmBandit {
    pub const HIDDEN: usize = 8;

    pub fn four_arm() -> Self {
        Self { rewards: vec![0.2, 0.5, 1.0, 0.1] }
    }

    pub fn best_arm(&self) -> usize {
        (0..self.rewards.len()).fold(0, |b, i| if self.rewards[i] > self.rewards[b] { i } else { b })
    }

    pub fn state() -> Vec<f64> {
        vec![1.0]
    }
}

impl Environment for ArmBandit {
    fn agent_ids(&self) -> Vec<String> {
        vec!["bandit".into()]
    }

    fn build_agents(&self, seed: u64, config: &PPOConfig) -> Result<Vec<ActorCritic>> {
        Ok(vec![ActorCritic::new("bandit", 1, self.rewards.len(), Self::HIDDEN, agent_seed(seed, "bandit"), config)?])
    }

    fn episode(&self, agent: usize, team: &[ActorCritic], rng: &mut DetRng) -> Result<Vec<EnvStep>> {
        let state = Self::state();
        let (action, log_prob) = team[agent].act(&state, &[], rng)?;
        Ok(vec![EnvStep { state, mask: vec![], action, log_prob, reward: self.rewards[action] }])
    }
}

/// Several agents each pick an arm; the payoff mixes the arm's own value
/// with how many other agents picked the same arm.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinationBandit {
    pub agents: usize,
    pub payoffs: Vec<f64>,
}

impl CoordinationBandit {
    pub fn new(agents: usize) -> Result<Self> {
        if agents == 0 {
            return Err(Error::invalid("coordination bandit needs at least one agent"));
        }
        Ok(Self { agents, payoffs: vec![0.3, 0.6, 1.0] })
    }
}

impl Environment for CoordinationBandit {
    fn agent_ids(&self) -> Vec<String> {
        (0..self.agents).map(|i| format!("agent{i}")).collect()
    }

    fn build_agents(&self, seed: u64, config: &PPOConfig) -> Result<Vec<ActorCritic>> {
        self.agent_ids()
            .iter()
            .map(|id| ActorCritic::new(id, 1, self.payoffs.len(), ArmBandit::HIDDEN, agent_seed(seed, id), config))
            .collect()
    }

    fn episode(&self, agent: usize, team: &[ActorCritic], rng: &mut DetRng) -> Result<Vec<EnvStep>> {
        let state = ArmBandit::state();
        let mut picks = vec![0; team.len()];
        let mut own = (0, 0.0);
        for (i, member) in team.iter().enumerate() {
            let (a, lp) = member.act(&state, &[], rng)?;
            picks[i] = a;
            if i == agent {
                own = (a, lp);
            }
        }
        let others = team.len().saturating_sub(1);
        let agree = if others == 0 {
            1.0
        } else {
            picks.iter().enumerate().filter(|(i, &p)| *i != agent && p == own.0).count() as f64 / others as f64
        };
        let reward = 0.5 * self.payoffs[own.0] + 0.5 * agree;
        Ok(vec![EnvStep { state, mask: vec![], action: own.0, log_prob: own.1, reward }])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextScenario {
    pub prompt: Vec<String>,
    pub reference: String,
}

/// Text agents append lexicon phrases; each step is rewarded with the change
/// in the text reward against the scenario reference.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEnhanceEnv {
    pub specs: Vec<TextAgentSpec>,
    /// Scenarios each agent trains on, parallel to `specs`.
    pub scenarios: Vec<Vec<TextScenario>>,
    pub max_steps: usize,
    pub weights: RewardWeights,
}

impl TextEnhanceEnv {
    pub fn new(specs: Vec<TextAgentSpec>, scenarios: Vec<Vec<TextScenario>>, max_steps: usize) -> Result<Self> {
        if specs.len() != scenarios.len() || specs.is_empty() {
            return Err(Error::invalid("text environment needs one scenario list per agent"));
        }
        if scenarios.iter().any(|s| s.is_empty()) {
            return Err(Error::invalid("every text agent needs at least one scenario"));
        }
        Ok(Self { specs, scenarios, max_steps, weights: RewardPreset::TextEq2.weights() })
    }

    pub fn score(&self, tokens: &[String], reference: &str) -> Result<f64> {
        let report = TextMetricReport::compute(&tokens.join(" "), reference)?;
        text_reward(&report, &self.weights)
    }
}

impl Environment for TextEnhanceEnv {
    fn agent_ids(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.role.name().to_string()).collect()
    }

    fn build_agents(&self, _seed: u64, config: &PPOConfig) -> Result<Vec<ActorCritic>> {
        self.specs
            .iter()
            .map(|s| ActorCritic::from_policy(s.role.name(), s.policy.clone(), config))
            .collect()
    }

    fn episode(&self, agent: usize, team: &[ActorCritic], rng: &mut DetRng) -> Result<Vec<EnvStep>> {
        let spec = &self.specs[agent];
        let pool = &self.scenarios[agent];
        let scenario = &pool[rng.random_range(0..pool.len())];
        let mut tokens = scenario.prompt.clone();
        let mut used = BTreeSet::new();
        let mut before = self.score(&tokens, &scenario.reference)?;
        let mut steps = vec![];
        for _ in 0..self.max_steps {
            let state = TextAgentSpec::state_features(&tokens)?;
            let mask = spec.action_mask(&used, &BTreeSet::new());
            let (action, log_prob) = team[agent].act(&state, &mask, rng)?;
            if action == spec.stop_action() {
                steps.push(EnvStep { state, mask, action, log_prob, reward: 0.0 });
                break;
            }
            used.insert(action);
            tokens.extend(spec.lexicon.entries()[action].tokens.iter().cloned());
            let after = self.score(&tokens, &scenario.reference)?;
            steps.push(EnvStep { state, mask, action, log_prob, reward: after - before });
            before = after;
        }
        Ok(steps)
    }
}

pub const PERTURBED_DIMS: usize = 8;
pub const IMAGE_ACTIONS: usize = 2 * PERTURBED_DIMS + 1;
pub const LATENT_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
struct ImageScenario {
    prompt: String,
    features: Vec<f64>,
    tags: BTreeSet<String>,
    base: Vec<GeneratedImage>,
}

/// Image agents nudge their latent by `±LATENT_STEP` along one of the first
/// `PERTURBED_DIMS` coordinates (or do nothing); each step is rewarded with
/// the change in the similarity/quality/diversity composite.
#[derive(Debug, Clone)]
pub struct ImageLatentEnv {
    pub agents: Vec<ImageAgentSpec>,
    pub horizon: usize,
    assessor: ConsistencyAssessor,
    scenarios: Vec<ImageScenario>,
}

/// Reward components of one image in context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageScore {
    pub similarity: f64,
    pub quality: f64,
    pub diversity: f64,
    pub reward: f64,
}

impl ImageLatentEnv {
    pub const HIDDEN: usize = 16;

    pub fn new(agents: Vec<ImageAgentSpec>, prompts: &[String], horizon: usize, assessor: ConsistencyAssessor) -> Result<Self> {
        if agents.is_empty() || prompts.is_empty() {
            return Err(Error::invalid("image environment needs agents and prompts"));
        }
        let scenarios = prompts
            .iter()
            .map(|p| {
                let features = embed_text(p)?.vector;
                let tags: BTreeSet<String> = tokenize(p).into_iter().collect();
                let base = agents
                    .iter()
                    .map(|a| generate_image(a, &route_features(a, &features)?, &tags))
                    .collect::<Result<_>>()?;
                Ok(ImageScenario { prompt: p.clone(), features, tags, base })
            })
            .collect::<Result<_>>()?;
        Ok(Self { agents, horizon, assessor, scenarios })
    }

    pub fn scenario_count(&self) -> usize {
        self.scenarios.len()
    }

    /// Candidates of every agent at its unperturbed latent for a scenario.
    pub fn base_images(&self, scenario: usize) -> &[GeneratedImage] {
        &self.scenarios[scenario].base
    }

    pub fn score(&self, agent: usize, scenario: usize, image: &GeneratedImage) -> Result<ImageScore> {
        let sc = &self.scenarios[scenario];
        let similarity = self.assessor.clip_similarity(&sc.prompt, image)?;
        let quality = image_quality_score(image);
        let mut group: Vec<GeneratedImage> = sc.base.clone();
        group[agent] = image.clone();
        let diversity = mean_pairwise_distance(&group)?;
        let sample: RewardSample = [("similarity", similarity), ("quality", quality), ("diversity", diversity)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        Ok(ImageScore { similarity, quality, diversity, reward: compute_reward(&sample, RewardPreset::ImageSqd)? })
    }

    fn apply(latent: &mut [f64], action: usize) {
        if action < 2 * PERTURBED_DIMS {
            let sign = if action.is_multiple_of(2) { 1.0 } else { -1.0 };
            latent[action / 2] += sign * LATENT_STEP;
        }
    }

    fn render(&self, agent: usize, scenario: usize, latent: &[f64]) -> Result<GeneratedImage> {
        let spec = &self.agents[agent];
        let z = crate::agents::AgentLatent { vector: latent.to_vec(), agent: spec.id() };
        generate_image(spec, &z, &self.scenarios[scenario].tags)
    }

    /// Greedy rollout of `policy` on a scenario; returns the final image.
    pub fn greedy_image(&self, agent: usize, scenario: usize, policy: &ActorCritic) -> Result<GeneratedImage> {
        let spec = &self.agents[agent];
        let mut z = route_features(spec, &self.scenarios[scenario].features)?.vector;
        for _ in 0..self.horizon {
            let lp = policy.log_probs(&z, &[])?;
            let a = (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b });
            Self::apply(&mut z, a);
        }
        self.render(agent, scenario, &z)
    }
}

impl Environment for ImageLatentEnv {
    fn agent_ids(&self) -> Vec<String> {
        self.agents.iter().map(|a| a.id()).collect()
    }

    fn build_agents(&self, seed: u64, config: &PPOConfig) -> Result<Vec<ActorCritic>> {
        self.agent_ids()
            .iter()
            .map(|id| {
                ActorCritic::new(id, crate::agents::LATENT_DIM, IMAGE_ACTIONS, Self::HIDDEN, agent_seed(seed, id), config)
            })
            .collect()
    }

    fn episode(&self, agent: usize, team: &[ActorCritic], rng: &mut DetRng) -> Result<Vec<EnvStep>> {
        let scenario = rng.random_range(0..self.scenarios.len());
        let spec = &self.agents[agent];
        let mut z = route_features(spec, &self.scenarios[scenario].features)?.vector;
        let mut before = self.score(agent, scenario, &self.scenarios[scenario].base[agent])?.reward;
        let mut steps = vec![];
        for _ in 0..self.horizon {
            let state = z.clone();
            let (action, log_prob) = team[agent].act(&state, &[], rng)?;
            Self::apply(&mut z, action);
            let after = self.score(agent, scenario, &self.render(agent, scenario, &z)?)?.reward;
            steps.push(EnvStep { state, mask: vec![], action, log_prob, reward: after - before });
            before = after;
        }
        Ok(steps)
    }
}
