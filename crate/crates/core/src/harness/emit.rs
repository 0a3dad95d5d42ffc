use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{experiment_metrics, RunRecord, SCHEMA_VERSION};
use super::summary::{aggregate_all, render_report, render_summary_csv};
use crate::error::{Error, Result};
use crate::fusion::FusionReport;
use crate::rl::TrainLogRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Markdown];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// False for files carrying wall-clock timings.
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// False when a write failed part way.
    pub complete: bool,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(dir.join(Self::FILE))?)?)
    }

    /// Files whose content no longer matches the recorded digest.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = vec![];
        for f in &self.files {
            if sha256_hex(&fs::read(dir.join(&f.path))?) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What a run hands to [`emit`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmitInput {
    /// Experiments whose score files are written even without records.
    pub experiments: Vec<u8>,
    pub records: Vec<RunRecord>,
    pub training_log: Vec<TrainLogRecord>,
}

/// A record as written to `records.jsonl`; timing lives in `timings.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLine {
    pub schema_version: u32,
    pub experiment: u8,
    pub scenario: String,
    pub condition: String,
    pub metrics: BTreeMap<String, f64>,
    pub seed: u64,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&RunRecord> for RecordLine {
    fn from(r: &RunRecord) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: r.experiment,
            scenario: r.scenario.clone(),
            condition: r.condition.clone(),
            metrics: r.metrics.clone(),
            seed: r.seed,
            config_digest: r.config_digest.clone(),
            error: r.error.clone(),
        }
    }
}

impl RecordLine {
    pub fn into_record(self) -> RunRecord {
        RunRecord {
            experiment: self.experiment,
            scenario: self.scenario,
            condition: self.condition,
            metrics: self.metrics,
            elapsed_seconds: 0.0,
            seed: self.seed,
            config_digest: self.config_digest,
            error: self.error,
        }
    }
}

/// Reads `records.jsonl` back; timings are not restored.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(dir.join("records.jsonl"))?;
    let mut out = vec![];
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let rec: RecordLine = serde_json::from_str(line)?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!("unsupported record schema version {}", rec.schema_version)));
        }
        out.push(rec.into_record());
    }
    Ok(out)
}

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "NaN".into(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `scenario,condition,<metrics...>,error` for one experiment; no timing.
pub fn scores_csv(experiment: u8, records: &[RunRecord]) -> String {
    let metrics = experiment_metrics(experiment);
    let mut out = format!("scenario,condition,{},error\n", metrics.join(","));
    for r in records.iter().filter(|r| r.experiment == experiment) {
        let vals: Vec<String> = metrics.iter().map(|m| num(r.metrics.get(*m).copied())).collect();
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&r.scenario),
            csv_field(&r.condition),
            vals.join(","),
            csv_field(r.error.as_deref().unwrap_or(""))
        ));
    }
    out
}

/// Per-method means over scenarios in the fixed fusion schema.
pub fn fusion_csv(records: &[RunRecord]) -> String {
    let mut methods: Vec<&str> = vec![];
    for r in records.iter().filter(|r| r.experiment == 5) {
        if !methods.contains(&r.condition.as_str()) {
            methods.push(&r.condition);
        }
    }
    let mut out = format!("{}\n", FusionReport::CSV_HEADER);
    for m in methods {
        let rows: Vec<&RunRecord> =
            records.iter().filter(|r| r.experiment == 5 && r.condition == m && r.error.is_none()).collect();
        let n = rows.len().max(1) as f64;
        let mean = |k: &str| rows.iter().filter_map(|r| r.metrics.get(k)).sum::<f64>() / n;
        let report = FusionReport {
            method: m.to_string(),
            quality: mean("quality"),
            similarity: mean("similarity"),
            overall: mean("overall"),
            elapsed_seconds: rows.iter().map(|r| r.elapsed_seconds).sum::<f64>() / n,
            error: None,
        };
        out.push_str(&report.csv_row());
        out.push('\n');
    }
    out
}

fn timings_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("experiment,scenario,condition,elapsed_seconds\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            r.experiment,
            csv_field(&r.scenario),
            csv_field(&r.condition),
            r.elapsed_seconds
        ));
    }
    out
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn write(&mut self, name: &str, content: &str, deterministic: bool) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        let back = fs::read(&path)?;
        let sha256 = sha256_hex(content.as_bytes());
        if sha256_hex(&back) != sha256 {
            return Err(Error::numeric(format!("read-back digest mismatch for {}", path.display())));
        }
        self.files.push(ManifestEntry { path: name.into(), sha256, bytes: back.len() as u64, deterministic });
        Ok(())
    }

    fn finish(self, complete: bool) -> Result<Manifest> {
        let manifest = Manifest { schema_version: SCHEMA_VERSION, complete, files: self.files };
        fs::write(self.dir.join(Manifest::FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(manifest)
    }
}

/// Writes the requested artifacts into `out_dir` and a manifest of them.
/// On a write failure the manifest lists what was written, is marked
/// incomplete, and the error is returned.
pub fn emit(input: &EmitInput, formats: &[Format], out_dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(out_dir)?;
    let mut writer = Writer { dir: out_dir, files: vec![] };
    match write_all(&mut writer, input, formats) {
        Ok(()) => writer.finish(true),
        Err(e) => {
            let _ = writer.finish(false);
            Err(e)
        }
    }
}

fn write_all(w: &mut Writer, input: &EmitInput, formats: &[Format]) -> Result<()> {
    let mut experiments = input.experiments.clone();
    experiments.extend(input.records.iter().map(|r| r.experiment));
    experiments.sort_unstable();
    experiments.dedup();
    let tables = aggregate_all(&input.records)?;
    if formats.contains(&Format::Csv) {
        for &e in &experiments {
            w.write(&format!("exp{e}_scores.csv"), &scores_csv(e, &input.records), true)?;
            if e == 5 {
                w.write("exp5_fusion.csv", &fusion_csv(&input.records), false)?;
            }
        }
        w.write("summary.csv", &render_summary_csv(&tables), true)?;
        w.write("timings.csv", &timings_csv(&input.records), false)?;
    }
    if formats.contains(&Format::Json) {
        let mut lines = String::new();
        for r in &input.records {
            lines.push_str(&serde_json::to_string(&RecordLine::from(r))?);
            lines.push('\n');
        }
        w.write("records.jsonl", &lines, true)?;
        w.write("summary.json", &(serde_json::to_string_pretty(&tables)? + "\n"), true)?;
        if !input.training_log.is_empty() {
            let mut log = String::new();
            for rec in &input.training_log {
                log.push_str(&rec.to_json_line()?);
                log.push('\n');
            }
            w.write("training.jsonl", &log, true)?;
        }
    }
    if formats.contains(&Format::Markdown) {
        w.write("report.md", &render_report(&tables), true)?;
    }
    Ok(())
}

/// Paths of the deterministic files listed in a manifest.
pub fn deterministic_files(manifest: &Manifest) -> Vec<PathBuf> {
    manifest.files.iter().filter(|f| f.deterministic).map(|f| PathBuf::from(&f.path)).collect()
}
