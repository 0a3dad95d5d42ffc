//! Command-line entry point. Exit status 0 on success, 1 on usage errors,
//! 2 on runtime failures.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::agents::{GeneratedImage, ImageAgentTeam, Provenance, RenderConfig};
use crate::consistency::{evaluate_integration, ConsistencyParams, IntegrationDirection};
use crate::embeddings::tokenize;
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionChoice, FusionParams, FusionWeights};
use crate::harness::{
    aggregate_all, default_out_dir, emit, load_records, render_report, render_summary_csv, run_experiment,
    EmitInput, ExperimentConfig, Format, ScenarioSuite,
};
use crate::imageio::{load_png, save_png};
use crate::rl::{
    train_agents, ArmBandit, CoordinationBandit, Environment, ImageLatentEnv, PPOConfig, RewardPreset,
    TextEnhanceEnv, TextScenario, TrainMode, TrainOptions,
};

#[derive(Debug, Parser)]
#[command(name = "agentfuse", version, about = "Multi-agent text and image generation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EnvKind {
    Bandit,
    Coordination,
    Text,
    Image,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        experiment: u8,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Scenario suite file, or a built-in suite name (paper5, rl3).
        #[arg(long, default_value = "paper5")]
        scenarios: PathBuf,
        /// Output directory; defaults to $AGENTFUSE_OUT or runs/latest.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated fusion methods for the fusion benchmark.
        #[arg(long)]
        fusion: Option<String>,
        #[arg(long, default_value_t = 64)]
        image_size: usize,
        #[arg(long, default_value = "standard")]
        ppo_preset: String,
        #[arg(long)]
        rl_iterations: Option<usize>,
    },
    /// Summarize a run directory.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: ReportFormat,
    },
    /// Render the three image agents' candidates for a prompt as PNGs.
    Generate {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        image_size: usize,
    },
    /// Fuse PNG images with one method.
    Fuse {
        #[arg(long, num_args = 2.., required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Prompt whose words steer content-aware weighting.
        #[arg(long, default_value = "")]
        prompt: String,
    },
    /// Score a text against a PNG image.
    Consistency {
        #[arg(long)]
        text: String,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = "bidirectional")]
        direction: String,
        /// Comma-separated concept tags detected on the image.
        #[arg(long, default_value = "")]
        tags: String,
        /// Comma-separated scenario concepts for coverage.
        #[arg(long, default_value = "")]
        concepts: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train agents with PPO and print the JSON-lines log.
    Train {
        /// Comma-separated agent names: text roles, image domains, or any
        /// names for the bandits.
        #[arg(long, default_value = "agent")]
        agents: String,
        #[arg(long, default_value = "sequential")]
        mode: String,
        #[arg(long, value_enum, default_value = "bandit")]
        env: EnvKind,
        #[arg(long, default_value_t = 50)]
        iterations: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "standard")]
        ppo_preset: String,
        /// Write the log here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect()
}

fn image_from_png(path: &Path, tags: BTreeSet<String>) -> Result<GeneratedImage> {
    Ok(GeneratedImage {
        pixels: load_png(path)?,
        concept_tags: tags,
        provenance: Provenance { agent: format!("file:{}", path.display()), seed: 0, prompt_hash: 0 },
    })
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { experiment, seed, scenarios, out, fusion, image_size, ppo_preset, rl_iterations } => {
            let suite = ScenarioSuite::load(&scenarios)?;
            let mut config = ExperimentConfig::new(experiment, seed, suite)?;
            config.scenario_source = scenarios.display().to_string();
            config.image_size = image_size;
            if let Some(list) = fusion {
                config.fusion = FusionChoice::parse_list(&list)?;
            }
            config.ppo = PPOConfig::preset(&ppo_preset)?;
            config.ppo_preset = ppo_preset;
            if let Some(n) = rl_iterations {
                config.rl_iterations = n;
            }
            config.out_dir = out.unwrap_or_else(default_out_dir);
            config.validate()?;
            let run = run_experiment(&config)?;
            let input = EmitInput { experiments: vec![experiment], records: run.records, training_log: run.training_log };
            let manifest = emit(&input, &Format::ALL, &config.out_dir)?;
            let failed = input.records.iter().filter(|r| r.error.is_some()).count();
            println!(
                "experiment {experiment}: {} records ({failed} failed), {} files in {}",
                input.records.len(),
                manifest.files.len(),
                config.out_dir.display()
            );
            Ok(())
        }
        Command::Report { input, format } => {
            let tables = aggregate_all(&load_records(&input)?)?;
            let text = match format {
                ReportFormat::Md => render_report(&tables),
                ReportFormat::Csv => render_summary_csv(&tables),
            };
            print!("{text}");
            Ok(())
        }
        Command::Generate { prompt, out_dir, seed, image_size } => {
            let team = ImageAgentTeam::builtin(RenderConfig::square(image_size), seed)?;
            std::fs::create_dir_all(&out_dir)?;
            for (agent, img) in team.agents.iter().zip(team.generate_candidates(&prompt)?) {
                let path = out_dir.join(format!("{}.png", agent.id()));
                save_png(&img.pixels, &path)?;
                println!("{}\t{}", path.display(), img.concept_tags.iter().cloned().collect::<Vec<_>>().join(","));
            }
            Ok(())
        }
        Command::Fuse { inputs, method, out, seed, prompt } => {
            let choice = FusionChoice::parse(&method)?;
            let images = inputs.iter().map(|p| image_from_png(p, BTreeSet::new())).collect::<Result<Vec<_>>>()?;
            let params = FusionParams { seed, prompt_tags: tokenize(&prompt).into_iter().collect(), ..Default::default() };
            let outcome = fuse(&images, &choice, &params)?;
            save_png(&outcome.image.pixels, &out)?;
            match &outcome.weights {
                FusionWeights::Global(w) => println!("weights: {w:?}"),
                FusionWeights::PerPixel { height, width, .. } => println!("per-pixel weights over {height}x{width}"),
            }
            Ok(())
        }
        Command::Consistency { text, image, direction, tags, concepts, seed } => {
            let direction = IntegrationDirection::parse(&direction)?;
            let img = image_from_png(&image, split_list(&tags).into_iter().collect())?;
            let params = ConsistencyParams { seed, ..Default::default() };
            let report = evaluate_integration(&text, &img, direction, &split_list(&concepts), &params)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Train { agents, mode, env, iterations, seed, ppo_preset, out } => {
            let names = split_list(&agents);
            if names.is_empty() {
                return Err(Error::config("no agents given"));
            }
            let mode = TrainMode::parse(&mode)?;
            let mut config = PPOConfig::preset(&ppo_preset)?;
            let environment: Box<dyn Environment> = match env {
                EnvKind::Bandit => Box::new(ArmBandit::four_arm()),
                EnvKind::Coordination => Box::new(CoordinationBandit::new(names.len())?),
                EnvKind::Text => Box::new(text_env(&names, seed)?),
                EnvKind::Image => {
                    config.reward_preset = RewardPreset::ImageSqd;
                    Box::new(image_env(&names, seed)?)
                }
            };
            let mut team = environment.build_agents(seed, &config)?;
            let opts = TrainOptions { iterations, seed, mode, config };
            let log = train_agents(&mut team, environment.as_ref(), &opts)?;
            let mut text = String::new();
            for rec in &log {
                text.push_str(&rec.to_json_line()?);
                text.push('\n');
            }
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
    }
}

fn text_env(names: &[String], seed: u64) -> Result<TextEnhanceEnv> {
    let suite = ScenarioSuite::builtin("paper5").expect("shipped suite");
    let mut specs = vec![];
    let mut pools = vec![];
    for name in names {
        let role = crate::agents::TextRole::parse(name)?;
        let pool: Vec<TextScenario> = suite
            .scenarios
            .iter()
            .filter(|s| role.domain().is_none_or(|d| d == s.domain))
            .map(|s| TextScenario { prompt: tokenize(&s.prompt), reference: s.reference.clone() })
            .collect();
        if pool.is_empty() {
            return Err(Error::config(format!("no scenarios for text agent {name}")));
        }
        specs.push(crate::agents::TextAgentSpec::builtin(role, seed));
        pools.push(pool);
    }
    TextEnhanceEnv::new(specs, pools, 12)
}

fn image_env(names: &[String], seed: u64) -> Result<ImageLatentEnv> {
    let team = ImageAgentTeam::builtin(RenderConfig::default(), seed)?;
    let agents = names
        .iter()
        .map(|n| Ok(team.get(crate::agents::Domain::parse(n)?).clone()))
        .collect::<Result<Vec<_>>>()?;
    let prompts: Vec<String> =
        ScenarioSuite::builtin("paper5").expect("shipped suite").scenarios.into_iter().map(|s| s.prompt).collect();
    let assessor = crate::consistency::ConsistencyAssessor::new(ConsistencyParams { seed, ..Default::default() })?;
    ImageLatentEnv::new(agents, &prompts, 3, assessor)
}
