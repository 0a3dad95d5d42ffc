use serde::{Deserialize, Serialize};

use super::{compute_advantage, ppo_update, ActorCritic, Environment, PPOConfig, Trajectory, Transition};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, label, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Agents update one at a time; later agents roll out against the
    /// already-updated earlier ones.
    Sequential,
    /// All agents roll out against the same snapshot, then all update.
    Simultaneous,
}

impl TrainMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sequential" => Ok(TrainMode::Sequential),
            "simultaneous" => Ok(TrainMode::Simultaneous),
            _ => Err(Error::config(format!("unknown training mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub iterations: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub config: PPOConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRecord {
    pub iteration: usize,
    pub agent: String,
    pub mean_reward: f64,
    pub mean_objective: f64,
    pub clip_fraction: f64,
    pub value_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TrainLogRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

struct Batch {
    transitions: Vec<Transition>,
    advantages: Vec<f64>,
    mean_reward: f64,
}

const MAX_EPISODES_PER_BATCH: usize = 10_000;

fn collect(
    env: &dyn Environment,
    agent: usize,
    snapshot: &[ActorCritic],
    iteration: usize,
    opts: &TrainOptions,
) -> Result<Batch> {
    let cfg = &opts.config;
    let id = &snapshot[agent].id;
    let mut transitions = vec![];
    let mut advantages = vec![];
    let mut returns = vec![];
    let mut episode = 0;
    while transitions.len() < cfg.batch_size {
        if episode == MAX_EPISODES_PER_BATCH {
            return Err(Error::numeric(format!("agent {id} could not fill a batch")));
        }
        let mut rng = rng_from_seed(derive_seed(opts.seed, &[label(id), iteration as u64, episode as u64]));
        episode += 1;
        let steps = env.episode(agent, snapshot, &mut rng)?;
        if steps.is_empty() {
            return Err(Error::invalid(format!("episode of agent {id} produced no steps")));
        }
        let values: Vec<f64> = steps.iter().map(|s| snapshot[agent].value_of(&s.state)).collect::<Result<_>>()?;
        let last = steps.len() - 1;
        returns.push(steps.iter().map(|s| s.reward).sum::<f64>());
        let ts: Vec<Transition> = steps
            .into_iter()
            .enumerate()
            .map(|(i, s)| Transition {
                state: s.state,
                mask: s.mask,
                action: s.action,
                old_log_prob: s.log_prob,
                reward: s.reward,
                value: values[i],
                next_value: if i == last { 0.0 } else { values[i + 1] },
                terminal: i == last,
            })
            .collect();
        let traj = Trajectory::new(ts, cfg.gamma);
        advantages.extend(compute_advantage(&traj, cfg)?.values);
        transitions.extend(traj.transitions);
    }
    let mean_reward = returns.iter().sum::<f64>() / returns.len() as f64;
    Ok(Batch { transitions, advantages, mean_reward })
}

fn update(agent: &mut ActorCritic, batch: Result<Batch>, iteration: usize, cfg: &PPOConfig) -> TrainLogRecord {
    let outcome = batch.and_then(|b| {
        let stats = ppo_update(agent, &b.transitions, &b.advantages, cfg)?;
        Ok((b.mean_reward, stats))
    });
    match outcome {
        Ok((mean_reward, stats)) => TrainLogRecord {
            iteration,
            agent: agent.id.clone(),
            mean_reward,
            mean_objective: stats.mean_objective,
            clip_fraction: stats.clip_fraction,
            value_loss: stats.value_loss_before,
            error: None,
        },
        Err(e) => TrainLogRecord {
            iteration,
            agent: agent.id.clone(),
            mean_reward: f64::NAN,
            mean_objective: f64::NAN,
            clip_fraction: f64::NAN,
            value_loss: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Trains `agents` in place and returns one log record per agent per
/// iteration. A failed rollout or update is logged and that agent skips the
/// iteration.
pub fn train_agents(agents: &mut [ActorCritic], env: &dyn Environment, opts: &TrainOptions) -> Result<Vec<TrainLogRecord>> {
    train_until(agents, env, opts, |_| false)
}

/// Like [`train_agents`], but stops after the first iteration at whose end
/// `done` holds for the agents.
pub fn train_until(
    agents: &mut [ActorCritic],
    env: &dyn Environment,
    opts: &TrainOptions,
    mut done: impl FnMut(&[ActorCritic]) -> bool,
) -> Result<Vec<TrainLogRecord>> {
    if agents.is_empty() {
        return Err(Error::invalid("no agents to train"));
    }
    opts.config.validate()?;
    let mut log = Vec::with_capacity(opts.iterations * agents.len());
    for it in 0..opts.iterations {
        match opts.mode {
            TrainMode::Sequential => {
                for i in 0..agents.len() {
                    let snapshot = agents.to_vec();
                    let batch = collect(env, i, &snapshot, it, opts);
                    log.push(update(&mut agents[i], batch, it, &opts.config));
                }
            }
            TrainMode::Simultaneous => {
                let snapshot = agents.to_vec();
                let batches: Vec<Result<Batch>> = (0..agents.len()).map(|i| collect(env, i, &snapshot, it, opts)).collect();
                for (agent, batch) in agents.iter_mut().zip(batches) {
                    log.push(update(agent, batch, it, &opts.config));
                }
            }
        }
        if done(agents) {
            break;
        }
    }
    Ok(log)
}
