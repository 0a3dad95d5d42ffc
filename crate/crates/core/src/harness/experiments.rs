use std::collections::BTreeMap;
use std::time::Instant;

use super::config::{metric_map, ExperimentConfig, RunRecord};
use super::ScenarioSpec;
use crate::agents::{
    multi_agent_enhance, DomainRouting, Enhanced, GeneratedImage, ImageAgentTeam, RenderConfig, TextAgentTeam,
    TextRole,
};
use crate::consistency::{ConsistencyAssessor, ConsistencyParams, IntegrationDirection};
use crate::embeddings::tokenize;
use crate::error::{Error, Result};
use crate::fusion::{
    benchmark_fusion, image_quality_score, mean_pairwise_distance, overall_score, FusionParams, Fuser,
    OverallWeighting,
};
use crate::rl::{
    compute_reward, train_agents, ImageLatentEnv, RewardPreset, RewardSample, TextEnhanceEnv, TextScenario,
    TrainLogRecord, TrainMode, TrainOptions,
};
use crate::rng::{derive_seed, label};
use crate::text_metrics::{text_reward, RewardWeights, TextMetricReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub records: Vec<RunRecord>,
    /// Per-iteration PPO log for the training experiments.
    pub training_log: Vec<TrainLogRecord>,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    text_team: TextAgentTeam,
    routing: DomainRouting,
    image_team: ImageAgentTeam,
    assessor: ConsistencyAssessor,
}

impl<'a> Context<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let text_team = TextAgentTeam::builtin(derive_seed(config.seed, &[label("text-team")]));
        let routing = DomainRouting::from_team(&text_team);
        let image_team = ImageAgentTeam::builtin(
            RenderConfig::square(config.image_size),
            derive_seed(config.seed, &[label("image-team")]),
        )?;
        let assessor = ConsistencyAssessor::new(ConsistencyParams {
            seed: derive_seed(config.seed, &[label("consistency")]),
            ..Default::default()
        })?;
        Ok(Self { config, text_team, routing, image_team, assessor })
    }

    fn enhance(&self, team: &TextAgentTeam, prompt: &str) -> Result<Enhanced> {
        multi_agent_enhance(&tokenize(prompt), team, &self.routing, self.config.text_max_steps)
    }

    fn fusion_params(&self, prompt: &str) -> FusionParams {
        FusionParams {
            prompt_tags: tokenize(prompt).into_iter().collect(),
            seed: derive_seed(self.config.seed, &[label("fusion")]),
            ..Default::default()
        }
    }

    fn fused(&self, prompt: &str, candidates: &[GeneratedImage]) -> Result<GeneratedImage> {
        let fuser = Fuser::new(self.config.pipeline_fusion.clone(), self.fusion_params(prompt), candidates.len())?;
        Ok(fuser.fuse(candidates)?.image)
    }
}

fn text_metrics(text: &str, reference: &str) -> Result<BTreeMap<String, f64>> {
    let r = TextMetricReport::compute(text, reference)?;
    let reward = text_reward(&r, &RewardWeights::text_default())?;
    Ok(metric_map([
        ("bleu", r.bleu),
        ("rouge1_f1", r.rouge1_f1),
        ("coherence", r.coherence),
        ("diversity", r.diversity),
        ("word_count", r.word_count as f64),
        ("text_reward", reward),
    ]))
}

fn image_metrics(similarity: f64, quality: f64, diversity: f64) -> Result<BTreeMap<String, f64>> {
    let sample: RewardSample = metric_map([("similarity", similarity), ("quality", quality), ("diversity", diversity)]);
    Ok(metric_map([
        ("similarity", similarity),
        ("quality", quality),
        ("image_diversity", diversity),
        ("overall", overall_score(quality, similarity, OverallWeighting::default())?),
        ("image_reward", compute_reward(&sample, RewardPreset::ImageSqd)?),
    ]))
}

/// Mean of each metric over several maps with the same keys.
fn mean_metrics(maps: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let n = maps.len() as f64;
    let mut out = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            *out.entry(k.clone()).or_insert(0.0) += v / n;
        }
    }
    out
}

/// Runs `f` for one (scenario, condition) cell, turning failures into an
/// error record.
fn cell(
    config: &ExperimentConfig,
    scenario: &ScenarioSpec,
    condition: &str,
    f: impl FnOnce() -> Result<BTreeMap<String, f64>>,
) -> Result<RunRecord> {
    let start = Instant::now();
    match f() {
        Ok(metrics) => RunRecord::new(config, &scenario.name, condition, metrics, start.elapsed().as_secs_f64()),
        Err(e) => Ok(RunRecord::failed(config, &scenario.name, condition, &e)),
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRun> {
    config.validate()?;
    let ctx = Context::new(config)?;
    let scenarios = &config.scenarios.scenarios;
    let mut training_log = vec![];
    let mut records = vec![];
    match config.experiment {
        1 => {
            for s in scenarios {
                records.push(cell(config, s, "single_agent", || {
                    text_metrics(&Enhanced::single(tokenize(&s.prompt)).text(), &s.reference)
                })?);
                records.push(cell(config, s, "multi_agent", || {
                    text_metrics(&ctx.enhance(&ctx.text_team, &s.prompt)?.text(), &s.reference)
                })?);
            }
        }
        2 => {
            let (trained, log) = train_text_team(&ctx)?;
            training_log = log;
            for s in scenarios {
                records.push(cell(config, s, "before_rl", || {
                    text_metrics(&ctx.enhance(&ctx.text_team, &s.prompt)?.text(), &s.reference)
                })?);
                records.push(cell(config, s, "after_rl", || {
                    text_metrics(&ctx.enhance(&trained, &s.prompt)?.text(), &s.reference)
                })?);
            }
        }
        3 => {
            for s in scenarios {
                records.push(cell(config, s, "single_agent", || {
                    let agent = ctx.image_team.get(s.domain);
                    let team = ImageAgentTeam { agents: vec![agent.clone()] };
                    let img = team.generate_candidates(&s.prompt)?.remove(0);
                    image_metrics(ctx.assessor.clip_similarity(&s.prompt, &img)?, image_quality_score(&img), 0.0)
                })?);
                records.push(cell(config, s, "multi_agent", || {
                    let enhanced = ctx.enhance(&ctx.text_team, &s.prompt)?.text();
                    let candidates = ctx.image_team.generate_candidates(&enhanced)?;
                    let fused = ctx.fused(&s.prompt, &candidates)?;
                    image_metrics(
                        ctx.assessor.clip_similarity(&s.prompt, &fused)?,
                        image_quality_score(&fused),
                        mean_pairwise_distance(&candidates)?,
                    )
                })?);
            }
        }
        4 => {
            let prompts: Vec<String> = scenarios.iter().map(|s| s.prompt.clone()).collect();
            let env = ImageLatentEnv::new(ctx.image_team.agents.clone(), &prompts, 3, ctx.assessor.clone())?;
            let opts = training_options(config, RewardPreset::ImageSqd);
            let mut agents = crate::rl::Environment::build_agents(&env, config.seed, &opts.config)?;
            let before = agents.clone();
            training_log = train_agents(&mut agents, &env, &opts)?;
            for (i, s) in scenarios.iter().enumerate() {
                for (condition, team) in [("before_rl", &before), ("after_rl", &agents)] {
                    records.push(cell(config, s, condition, || {
                        let per_agent = (0..team.len())
                            .map(|a| {
                                let img = if condition == "before_rl" {
                                    env.base_images(i)[a].clone()
                                } else {
                                    env.greedy_image(a, i, &team[a])?
                                };
                                let sc = env.score(a, i, &img)?;
                                image_metrics(sc.similarity, sc.quality, sc.diversity)
                            })
                            .collect::<Result<Vec<_>>>()?;
                        Ok(mean_metrics(&per_agent))
                    })?);
                }
            }
        }
        5 => {
            for s in scenarios {
                let run = || -> Result<Vec<RunRecord>> {
                    let enhanced = ctx.enhance(&ctx.text_team, &s.prompt)?.text();
                    let candidates = ctx.image_team.generate_candidates(&enhanced)?;
                    let reports = benchmark_fusion(
                        &candidates,
                        &config.fusion,
                        &ctx.fusion_params(&s.prompt),
                        OverallWeighting::default(),
                        |img| ctx.assessor.clip_similarity(&s.prompt, img),
                    )?;
                    reports
                        .into_iter()
                        .map(|r| match r.error {
                            Some(e) => Ok(RunRecord::failed(config, &s.name, &r.method, &Error::numeric(e))),
                            None => RunRecord::new(
                                config,
                                &s.name,
                                &r.method,
                                metric_map([("quality", r.quality), ("similarity", r.similarity), ("overall", r.overall)]),
                                r.elapsed_seconds,
                            ),
                        })
                        .collect()
                };
                match run() {
                    Ok(rs) => records.extend(rs),
                    Err(e) => {
                        for c in &config.fusion {
                            records.push(RunRecord::failed(config, &s.name, &c.label, &e));
                        }
                    }
                }
            }
        }
        _ => {
            for s in scenarios {
                let prepared = (|| -> Result<(String, GeneratedImage)> {
                    let enhanced = ctx.enhance(&ctx.text_team, &s.prompt)?.text();
                    let candidates = ctx.image_team.generate_candidates(&enhanced)?;
                    Ok((enhanced, ctx.fused(&s.prompt, &candidates)?))
                })();
                for d in IntegrationDirection::ALL {
                    records.push(cell(config, s, d.name(), || {
                        let (text, image) = prepared.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                        let r = ctx.assessor.evaluate(text, image, d, &s.concepts)?;
                        Ok(metric_map([
                            ("consistency", r.score),
                            ("contrastive_loss", r.contrastive_loss),
                            ("cos_sim", r.cos_sim),
                            ("obj_valid", r.obj_valid),
                            ("clip_similarity", r.clip_similarity),
                            ("concept_coverage", r.concept_coverage),
                            ("semantic_alignment", r.semantic_alignment),
                        ]))
                    })?);
                }
            }
        }
    }
    // Stable sort keeps the condition order within a scenario.
    records.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    Ok(ExperimentRun { records, training_log })
}

fn training_options(config: &ExperimentConfig, preset: RewardPreset) -> TrainOptions {
    TrainOptions {
        iterations: config.rl_iterations,
        seed: derive_seed(config.seed, &[label("ppo")]),
        mode: TrainMode::Simultaneous,
        config: crate::rl::PPOConfig { reward_preset: preset, ..config.ppo.clone() },
    }
}

/// Trains the expander on every prompt and each domain agent on the expanded
/// prompts routed to it, then returns the team with the trained policies.
fn train_text_team(ctx: &Context) -> Result<(TextAgentTeam, Vec<TrainLogRecord>)> {
    let config = ctx.config;
    let mut specs = vec![ctx.text_team.expander.clone()];
    let mut pools = vec![config
        .scenarios
        .scenarios
        .iter()
        .map(|s| TextScenario { prompt: tokenize(&s.prompt), reference: s.reference.clone() })
        .collect::<Vec<_>>()];
    for role in [TextRole::Architecture, TextRole::Portrait, TextRole::Landscape] {
        let domain = role.domain().expect("domain role");
        let mut pool = vec![];
        for s in &config.scenarios.scenarios {
            let prompt = tokenize(&s.prompt);
            if ctx.routing.route(&prompt) == Some(domain) {
                let expanded = crate::agents::enhance_text(&ctx.text_team.expander, &prompt, config.text_max_steps)?;
                pool.push(TextScenario { prompt: expanded, reference: s.reference.clone() });
            }
        }
        if !pool.is_empty() {
            specs.push(ctx.text_team.get(role).clone());
            pools.push(pool);
        }
    }
    let env = TextEnhanceEnv::new(specs, pools, config.text_max_steps)?;
    let opts = training_options(config, RewardPreset::TextEq2);
    let mut agents = crate::rl::Environment::build_agents(&env, config.seed, &opts.config)?;
    let log = train_agents(&mut agents, &env, &opts)?;
    let mut team = ctx.text_team.clone();
    for (spec, agent) in env.specs.iter().zip(&agents) {
        team.get_mut(spec.role).policy = agent.policy.clone();
    }
    Ok((team, log))
}
