use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lexicon::Lexicon;
use super::Domain;
use crate::embeddings::embed_tokens;
use crate::error::{Error, Result};
use crate::numerics::{masked_log_softmax, Activation, Mlp};
use crate::rng::{derive_seed, label, DetRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextRole {
    Expander,
    Architecture,
    Portrait,
    Landscape,
}

impl TextRole {
    pub const ALL: [TextRole; 4] = [TextRole::Expander, TextRole::Architecture, TextRole::Portrait, TextRole::Landscape];

    pub fn name(self) -> &'static str {
        match self {
            TextRole::Expander => "expander",
            TextRole::Architecture => "architecture",
            TextRole::Portrait => "portrait",
            TextRole::Landscape => "landscape",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == name)
            .ok_or_else(|| Error::config(format!("unknown text agent role {name:?}")))
    }

    pub fn domain(self) -> Option<Domain> {
        match self {
            TextRole::Expander => None,
            TextRole::Architecture => Some(Domain::Architecture),
            TextRole::Portrait => Some(Domain::Portrait),
            TextRole::Landscape => Some(Domain::Landscape),
        }
    }

    pub fn builtin_lexicon(self) -> Lexicon {
        let src = match self {
            TextRole::Expander => include_str!("../../data/lexicons/expander.txt"),
            TextRole::Architecture => include_str!("../../data/lexicons/architecture.txt"),
            TextRole::Portrait => include_str!("../../data/lexicons/portrait.txt"),
            TextRole::Landscape => include_str!("../../data/lexicons/landscape.txt"),
        };
        Lexicon::parse(src).expect("shipped lexicon parses")
    }
}

/// A text-enhancement agent: a lexicon of appendable phrases and a policy
/// over "append phrase i" actions plus a final stop action.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAgentSpec {
    pub role: TextRole,
    pub lexicon: Lexicon,
    pub policy: Mlp,
    pub seed: u64,
}

/// How the next action is chosen.
pub enum Sampling<'a> {
    Greedy,
    Stochastic { temperature: f64, rng: &'a mut DetRng },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextStep {
    pub state: Vec<f64>,
    pub mask: Vec<bool>,
    pub action: usize,
    pub log_prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextEpisode {
    pub tokens: Vec<String>,
    pub steps: Vec<TextStep>,
    /// Lexicon indices appended, in order.
    pub appended: Vec<usize>,
}

impl TextAgentSpec {
    pub const HIDDEN: usize = 16;
    pub const STOP_BIAS: f64 = -2.0;

    pub fn new(role: TextRole, lexicon: Lexicon, seed: u64) -> Result<Self> {
        if lexicon.is_empty() {
            return Err(Error::config("text agent needs a nonempty lexicon"));
        }
        let actions = lexicon.len() + 1;
        let mut policy = Mlp::new(
            &[crate::embeddings::TEXT_DIM, Self::HIDDEN, actions],
            &[Activation::Tanh, Activation::Identity],
            seed,
        )?;
        let last = policy.layers_mut().len() - 1;
        policy.layers_mut()[last].bias[actions - 1] = Self::STOP_BIAS;
        Ok(Self { role, lexicon, policy, seed })
    }

    pub fn builtin(role: TextRole, root_seed: u64) -> Self {
        let seed = derive_seed(root_seed, &[label("text-agent"), label(role.name())]);
        Self::new(role, role.builtin_lexicon(), seed).expect("builtin agent")
    }

    pub fn action_count(&self) -> usize {
        self.lexicon.len() + 1
    }

    pub fn stop_action(&self) -> usize {
        self.lexicon.len()
    }

    /// Policy input: the hashed bag-of-words embedding of the current text.
    pub fn state_features(tokens: &[String]) -> Result<Vec<f64>> {
        Ok(embed_tokens(tokens)?.vector)
    }

    /// Phrases already used or excluded are unavailable; stop always is.
    pub fn action_mask(&self, used: &BTreeSet<usize>, excluded: &BTreeSet<String>) -> Vec<bool> {
        let mut mask: Vec<bool> = self
            .lexicon
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| !used.contains(&i) && !excluded.contains(&e.phrase))
            .collect();
        mask.push(true);
        mask
    }

    /// Log-probabilities of every action in `state` under `mask`.
    pub fn action_log_probs(&self, state: &[f64], mask: &[bool]) -> Result<Vec<f64>> {
        let logits = self.policy.predict(state)?;
        masked_log_softmax(&logits, mask)
    }
}

/// Runs the agent on `prompt`, appending lexicon phrases until it chooses
/// stop or `max_steps` actions were taken. Phrases in `excluded` are never
/// appended. The prompt is always a prefix of the result.
pub fn rollout_text(
    agent: &TextAgentSpec,
    prompt: &[String],
    max_steps: usize,
    excluded: &BTreeSet<String>,
    mut sampling: Sampling<'_>,
) -> Result<TextEpisode> {
    if prompt.is_empty() {
        return Err(Error::EmptyInput("prompt has no tokens".into()));
    }
    if max_steps == 0 {
        return Err(Error::invalid("max_steps must be at least 1"));
    }
    let mut tokens = prompt.to_vec();
    let mut used = BTreeSet::new();
    let mut steps = vec![];
    let mut appended = vec![];
    for _ in 0..max_steps {
        let state = TextAgentSpec::state_features(&tokens)?;
        let mask = agent.action_mask(&used, excluded);
        let log_probs = agent.action_log_probs(&state, &mask)?;
        let action = match &mut sampling {
            Sampling::Greedy => argmax(&log_probs),
            Sampling::Stochastic { temperature, rng } => {
                if !(*temperature > 0.0) {
                    return Err(Error::invalid("sampling temperature must be positive"));
                }
                let logits = agent.policy.predict(&state)?;
                let tempered: Vec<f64> = logits.iter().map(|l| l / *temperature).collect();
                sample_log_probs(&masked_log_softmax(&tempered, &mask)?, rng)
            }
        };
        let log_prob = log_probs[action];
        steps.push(TextStep { state, mask, action, log_prob });
        if action == agent.stop_action() {
            break;
        }
        used.insert(action);
        appended.push(action);
        tokens.extend(agent.lexicon.entries()[action].tokens.iter().cloned());
    }
    Ok(TextEpisode { tokens, steps, appended })
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws an index from log-probabilities; `-inf` entries are never chosen.
pub fn sample_log_probs(log_probs: &[f64], rng: &mut DetRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, lp) in log_probs.iter().enumerate() {
        if lp.is_finite() {
            acc += lp.exp();
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Greedy enhancement of `prompt`.
pub fn enhance_text(agent: &TextAgentSpec, prompt: &[String], max_steps: usize) -> Result<Vec<String>> {
    Ok(rollout_text(agent, prompt, max_steps, &BTreeSet::new(), Sampling::Greedy)?.tokens)
}

/// Tokens plus sentence boundaries (exclusive end offsets), one sentence per
/// contributing agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Enhanced {
    pub tokens: Vec<String>,
    pub sentence_ends: Vec<usize>,
}

impl Enhanced {
    pub fn single(tokens: Vec<String>) -> Self {
        let n = tokens.len();
        Self { tokens, sentence_ends: vec![n] }
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    /// Space-joined tokens with a period closing every sentence.
    pub fn text(&self) -> String {
        let mut out = String::new();
        let mut start = 0;
        for &end in &self.sentence_ends {
            if end > start {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push_str(&self.tokens[start..end].join(" "));
                out.push('.');
            }
            start = end;
        }
        out
    }
}

/// The four text agents.
#[derive(Debug, Clone, PartialEq)]
pub struct TextAgentTeam {
    pub expander: TextAgentSpec,
    pub architecture: TextAgentSpec,
    pub portrait: TextAgentSpec,
    pub landscape: TextAgentSpec,
}

impl TextAgentTeam {
    pub fn builtin(seed: u64) -> Self {
        Self {
            expander: TextAgentSpec::builtin(TextRole::Expander, seed),
            architecture: TextAgentSpec::builtin(TextRole::Architecture, seed),
            portrait: TextAgentSpec::builtin(TextRole::Portrait, seed),
            landscape: TextAgentSpec::builtin(TextRole::Landscape, seed),
        }
    }

    pub fn get(&self, role: TextRole) -> &TextAgentSpec {
        match role {
            TextRole::Expander => &self.expander,
            TextRole::Architecture => &self.architecture,
            TextRole::Portrait => &self.portrait,
            TextRole::Landscape => &self.landscape,
        }
    }

    pub fn get_mut(&mut self, role: TextRole) -> &mut TextAgentSpec {
        match role {
            TextRole::Expander => &mut self.expander,
            TextRole::Architecture => &mut self.architecture,
            TextRole::Portrait => &mut self.portrait,
            TextRole::Landscape => &mut self.landscape,
        }
    }

    pub fn domain_agent(&self, domain: Domain) -> &TextAgentSpec {
        match domain {
            Domain::Architecture => &self.architecture,
            Domain::Portrait => &self.portrait,
            Domain::Landscape => &self.landscape,
        }
    }
}

/// Keyword sets used to pick a domain agent for a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainRouting {
    pub keywords: BTreeMap<Domain, BTreeSet<String>>,
}

impl DomainRouting {
    /// Each domain's lexicon tags plus a short list of subject nouns.
    pub fn from_team(team: &TextAgentTeam) -> Self {
        let extra: [(Domain, &[&str]); 3] = [
            (
                Domain::Architecture,
                &["building", "architecture", "palace", "fortress", "temple", "city", "castle", "station", "cathedral", "church", "tower"],
            ),
            (
                Domain::Portrait,
                &["portrait", "man", "woman", "person", "elderly", "elder", "wizard", "king", "queen", "knight", "child", "face"],
            ),
            (
                Domain::Landscape,
                &["landscape", "mountain", "mountains", "lake", "forest", "river", "valley", "vista", "sea", "ocean", "meadow", "clearing"],
            ),
        ];
        let keywords = extra
            .into_iter()
            .map(|(d, words)| {
                let mut set = team.domain_agent(d).lexicon.tags();
                set.extend(words.iter().map(|w| w.to_string()));
                (d, set)
            })
            .collect();
        Self { keywords }
    }

    /// Domain with the most keyword hits; ties go to the earlier domain.
    pub fn route(&self, prompt: &[String]) -> Option<Domain> {
        let mut best: Option<(Domain, usize)> = None;
        for d in Domain::ALL {
            let hits = self
                .keywords
                .get(&d)
                .map_or(0, |k| prompt.iter().filter(|t| k.contains(t.as_str())).count());
            if hits > 0 && best.is_none_or(|(_, h)| hits > h) {
                best = Some((d, hits));
            }
        }
        best.map(|(d, _)| d)
    }
}

/// Expander first, then the routed domain agent continuing from the
/// expander's output without repeating its phrases.
pub fn multi_agent_enhance(
    prompt: &[String],
    team: &TextAgentTeam,
    routing: &DomainRouting,
    max_steps: usize,
) -> Result<Enhanced> {
    let expanded = rollout_text(&team.expander, prompt, max_steps, &BTreeSet::new(), Sampling::Greedy)?;
    let mut sentence_ends = vec![prompt.len()];
    if expanded.tokens.len() > prompt.len() {
        sentence_ends.push(expanded.tokens.len());
    }
    let Some(domain) = routing.route(prompt) else {
        return Ok(Enhanced { tokens: expanded.tokens, sentence_ends });
    };
    let used: BTreeSet<String> = expanded
        .appended
        .iter()
        .map(|&i| team.expander.lexicon.entries()[i].phrase.clone())
        .collect();
    let agent = team.domain_agent(domain);
    let out = rollout_text(agent, &expanded.tokens, max_steps, &used, Sampling::Greedy)?;
    if out.tokens.len() > expanded.tokens.len() {
        sentence_ends.push(out.tokens.len());
    }
    Ok(Enhanced { tokens: out.tokens, sentence_ends })
}
