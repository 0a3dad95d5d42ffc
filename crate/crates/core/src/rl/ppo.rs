use serde::{Deserialize, Serialize};

use super::{clipped_objective, OptimizerKind, PPOConfig, Transition};
use crate::agents::sample_log_probs;
use crate::error::{Error, Result};
use crate::numerics::{log_softmax, masked_log_softmax, Activation, Gradients, Mlp};
use crate::rng::DetRng;

/// First-order optimizer with per-parameter state. Gradients passed to
/// [`Optimizer::step`] are descent directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, learning_rate: f64, params: usize) -> Self {
        Self { kind, learning_rate, m: vec![0.0; params], v: vec![0.0; params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.learning_rate * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
                let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
                for i in 0..params.len() {
                    self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
                    self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
                    let mh = self.m[i] / bc1;
                    let vh = self.v[i] / bc2;
                    params[i] -= self.learning_rate * mh / (vh.sqrt() + Self::EPS);
                }
            }
        }
    }
}

/// Adam with the default moments, for callers that only need that.
pub type Adam = Optimizer;

/// Policy and value networks of one agent plus their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    pub id: String,
    pub policy: Mlp,
    pub value: Mlp,
    policy_opt: Optimizer,
    value_opt: Optimizer,
}

impl ActorCritic {
    pub const VALUE_HIDDEN: usize = 16;

    pub fn new(id: &str, state_dim: usize, actions: usize, hidden: usize, seed: u64, config: &PPOConfig) -> Result<Self> {
        let policy = Mlp::new(&[state_dim, hidden, actions], &[Activation::Tanh, Activation::Identity], seed)?;
        Self::from_policy(id, policy, config)
    }

    /// Wraps an existing policy with a fresh value network.
    pub fn from_policy(id: &str, policy: Mlp, config: &PPOConfig) -> Result<Self> {
        let value = Mlp::new(
            &[policy.in_dim(), Self::VALUE_HIDDEN, 1],
            &[Activation::Tanh, Activation::Identity],
            policy.seed().wrapping_add(1),
        )?;
        Ok(Self {
            id: id.to_string(),
            policy_opt: Optimizer::new(config.optimizer, config.learning_rate, policy.param_count()),
            value_opt: Optimizer::new(config.optimizer, config.learning_rate, value.param_count()),
            policy,
            value,
        })
    }

    pub fn log_probs(&self, state: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        action_log_probs(&self.policy, state, mask)
    }

    pub fn act(&self, state: &[f64], mask: &[bool], rng: &mut DetRng) -> Result<(usize, f64)> {
        let lp = self.log_probs(state, mask)?;
        let a = sample_log_probs(&lp, rng);
        Ok((a, lp[a]))
    }

    pub fn value_of(&self, state: &[f64]) -> Result<f64> {
        Ok(self.value.predict(state)?[0])
    }
}

fn action_log_probs(policy: &Mlp, state: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
    let logits = policy.predict(state)?;
    if mask.is_empty() {
        log_softmax(&logits, 1.0)
    } else {
        masked_log_softmax(&logits, mask)
    }
}

fn check_batch(batch: &[Transition], advantages: &[f64]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("PPO batch is empty".into()));
    }
    if batch.len() != advantages.len() {
        return Err(Error::invalid(format!("{} transitions but {} advantages", batch.len(), advantages.len())));
    }
    Ok(())
}

/// Mean clipped surrogate over the batch under `policy`.
pub fn policy_objective(policy: &Mlp, batch: &[Transition], advantages: &[f64], epsilon: f64) -> Result<f64> {
    check_batch(batch, advantages)?;
    let mut total = 0.0;
    for (t, &a) in batch.iter().zip(advantages) {
        let lp = action_log_probs(policy, &t.state, &t.mask)?;
        total += clipped_objective(lp[t.action], t.old_log_prob, a, epsilon);
    }
    Ok(total / batch.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGradient {
    pub objective: f64,
    /// Ascent direction of the mean objective.
    pub gradient: Gradients,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Analytic gradient of [`policy_objective`]. A sample contributes only
/// when its unclipped term is the active one.
pub fn policy_gradient(policy: &Mlp, batch: &[Transition], advantages: &[f64], epsilon: f64) -> Result<PolicyGradient> {
    check_batch(batch, advantages)?;
    let n = batch.len() as f64;
    let mut gradient = Gradients::zeros_like(policy);
    let (mut objective, mut ratios, mut clipped) = (0.0, 0.0, 0usize);
    for (t, &adv) in batch.iter().zip(advantages) {
        let (logits, cache) = policy.forward(&t.state)?;
        let lp = if t.mask.is_empty() { log_softmax(&logits, 1.0)? } else { masked_log_softmax(&logits, &t.mask)? };
        let ratio = (lp[t.action] - t.old_log_prob).exp();
        let clip_ratio = ratio.clamp(1.0 - epsilon, 1.0 + epsilon);
        objective += (ratio * adv).min(clip_ratio * adv);
        ratios += ratio;
        if (ratio - 1.0).abs() > epsilon {
            clipped += 1;
        }
        let active = ratio * adv < clip_ratio * adv || ratio == clip_ratio;
        if !active || adv == 0.0 {
            continue;
        }
        let coeff = ratio * adv / n;
        let out_grad: Vec<f64> = lp
            .iter()
            .enumerate()
            .map(|(j, l)| {
                let p = if l.is_finite() { l.exp() } else { 0.0 };
                coeff * ((j == t.action) as u8 as f64 - p)
            })
            .collect();
        gradient.add_scaled(&policy.backward(&cache, &out_grad)?, 1.0);
    }
    Ok(PolicyGradient {
        objective: objective / n,
        gradient,
        mean_ratio: ratios / n,
        clip_fraction: clipped as f64 / n,
    })
}

fn td_target(t: &Transition, gamma: f64) -> f64 {
    t.reward + if t.terminal { 0.0 } else { gamma * t.next_value }
}

/// Mean squared one-step TD error with the bootstrap target held fixed.
pub fn value_loss(value: &Mlp, batch: &[Transition], gamma: f64) -> Result<f64> {
    let mut total = 0.0;
    for t in batch {
        let e = td_target(t, gamma) - value.predict(&t.state)?[0];
        total += e * e;
    }
    Ok(total / batch.len().max(1) as f64)
}

fn value_gradient(value: &Mlp, batch: &[Transition], gamma: f64) -> Result<Gradients> {
    let n = batch.len() as f64;
    let mut g = Gradients::zeros_like(value);
    for t in batch {
        let (out, cache) = value.forward(&t.state)?;
        let e = out[0] - td_target(t, gamma);
        g.add_scaled(&value.backward(&cache, &[2.0 * e / n])?, 1.0);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Mean clipped objective at the start of the update.
    pub mean_objective: f64,
    /// Mean ratio and clip fraction in the last epoch.
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub value_loss_before: f64,
    pub value_loss_after: f64,
}

/// Runs `epochs_per_batch` full-batch epochs: ascend the clipped objective,
/// descend the value loss.
pub fn ppo_update(
    agent: &mut ActorCritic,
    batch: &[Transition],
    advantages: &[f64],
    config: &PPOConfig,
) -> Result<UpdateStats> {
    config.validate()?;
    check_batch(batch, advantages)?;
    let value_loss_before = value_loss(&agent.value, batch, config.gamma)?;
    let mut stats = UpdateStats {
        mean_objective: 0.0,
        mean_ratio: 1.0,
        clip_fraction: 0.0,
        value_loss_before,
        value_loss_after: value_loss_before,
    };
    for epoch in 0..config.epochs_per_batch {
        let pg = policy_gradient(&agent.policy, batch, advantages, config.clip_epsilon)?;
        if epoch == 0 {
            stats.mean_objective = pg.objective;
        }
        stats.mean_ratio = pg.mean_ratio;
        stats.clip_fraction = pg.clip_fraction;
        if !pg.gradient.all_finite() {
            return Err(Error::numeric(format!(
                "policy gradient of agent {} is not finite at epoch {epoch} (objective {}, mean ratio {})",
                agent.id, pg.objective, pg.mean_ratio
            )));
        }
        let descent: Vec<f64> = pg.gradient.flat().iter().map(|g| -g).collect();
        let mut params = agent.policy.flat_params();
        agent.policy_opt.step(&mut params, &descent);
        agent.policy.set_flat_params(&params)?;

        let vg = value_gradient(&agent.value, batch, config.gamma)?;
        if !vg.all_finite() {
            return Err(Error::numeric(format!("value gradient of agent {} is not finite at epoch {epoch}", agent.id)));
        }
        let mut params = agent.value.flat_params();
        agent.value_opt.step(&mut params, &vg.flat());
        agent.value.set_flat_params(&params)?;
    }
    stats.value_loss_after = value_loss(&agent.value, batch, config.gamma)?;
    Ok(stats)
}
