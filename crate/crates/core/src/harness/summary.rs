use serde::{Deserialize, Serialize};

use super::config::{experiment_metrics, RunRecord};
use crate::error::{Error, Result};

/// `100 (after - before) / before`; `None` when `before` is zero.
pub fn relative_change(before: f64, after: f64) -> Option<f64> {
    if before == 0.0 {
        return None;
    }
    Some(100.0 * (after - before) / before)
}

pub fn round_to(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    (value * scale).round() / scale
}

/// One decimal with an explicit sign; `n/a` for an undefined change.
pub fn format_change(change: Option<f64>) -> String {
    match change {
        Some(c) if c.is_finite() => {
            let r = round_to(c, 1);
            if r > 0.0 {
                format!("+{r:.1}")
            } else if r == 0.0 {
                "0.0".into()
            } else {
                format!("{r:.1}")
            }
        }
        _ => "n/a".into(),
    }
}

/// Display precision of a metric.
pub fn metric_decimals(metric: &str) -> usize {
    if metric == "word_count" {
        1
    } else {
        3
    }
}

pub fn experiment_title(experiment: u8) -> &'static str {
    match experiment {
        1 => "Text generation: single vs multi-agent",
        2 => "Text agents: before vs after PPO",
        3 => "Image generation: single vs multi-agent",
        4 => "Image agents: before vs after PPO",
        5 => "Image fusion methods",
        _ => "Text-image integration directions",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTable {
    pub experiment: u8,
    pub title: String,
    pub conditions: Vec<String>,
    pub metrics: Vec<String>,
    /// `means[metric][condition]` over scenarios without errors.
    pub means: Vec<Vec<f64>>,
    /// Scenarios contributing to each condition.
    pub counts: Vec<usize>,
    /// Per metric change from the first to the second condition, for the
    /// two-condition experiments.
    pub change: Option<Vec<Option<f64>>>,
}

impl SummaryTable {
    pub fn mean(&self, metric: &str, condition: &str) -> Option<f64> {
        let m = self.metrics.iter().position(|x| x == metric)?;
        let c = self.conditions.iter().position(|x| x == condition)?;
        Some(self.means[m][c])
    }

    pub fn has_change_column(&self) -> bool {
        self.change.is_some()
    }
}

pub fn aggregate(records: &[RunRecord]) -> Result<SummaryTable> {
    let Some(first) = records.first() else {
        return Err(Error::invalid("cannot aggregate an empty record list"));
    };
    let experiment = first.experiment;
    if records.iter().any(|r| r.experiment != experiment) {
        return Err(Error::invalid("records span several experiments"));
    }
    let mut conditions: Vec<String> = vec![];
    for r in records {
        if !conditions.contains(&r.condition) {
            conditions.push(r.condition.clone());
        }
    }
    let metrics: Vec<String> = experiment_metrics(experiment).iter().map(|s| s.to_string()).collect();
    let counts: Vec<usize> = conditions
        .iter()
        .map(|c| records.iter().filter(|r| &r.condition == c && r.error.is_none()).count())
        .collect();
    let means: Vec<Vec<f64>> = metrics
        .iter()
        .map(|m| {
            conditions
                .iter()
                .map(|c| {
                    let vals: Vec<f64> = records
                        .iter()
                        .filter(|r| &r.condition == c && r.error.is_none())
                        .filter_map(|r| r.metrics.get(m).copied())
                        .collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                })
                .collect()
        })
        .collect();
    let change = (experiment <= 4 && conditions.len() == 2)
        .then(|| means.iter().map(|row| relative_change(row[0], row[1])).collect());
    Ok(SummaryTable {
        experiment,
        title: experiment_title(experiment).into(),
        conditions,
        metrics,
        means,
        counts,
        change,
    })
}

/// Splits records by experiment and aggregates each group.
pub fn aggregate_all(records: &[RunRecord]) -> Result<Vec<SummaryTable>> {
    let mut exps: Vec<u8> = records.iter().map(|r| r.experiment).collect();
    exps.sort_unstable();
    exps.dedup();
    exps.into_iter()
        .map(|e| aggregate(&records.iter().filter(|r| r.experiment == e).cloned().collect::<Vec<_>>()))
        .collect()
}

fn cell(value: f64, decimals: usize) -> String {
    if value.is_finite() {
        format!("{value:.decimals$}")
    } else {
        "n/a".into()
    }
}

/// Markdown for one table. Change cells are computed from the displayed
/// (rounded) means so the table is self-consistent as printed.
pub fn render_markdown(table: &SummaryTable) -> String {
    let mut out = format!("## Experiment {}: {}\n\n", table.experiment, table.title);
    if table.experiment <= 4 {
        out.push_str("| Metric |");
        for c in &table.conditions {
            out.push_str(&format!(" {c} |"));
        }
        if table.has_change_column() {
            out.push_str(" Δ (%) |");
        }
        out.push('\n');
        let cols = table.conditions.len() + 1 + table.has_change_column() as usize;
        out.push_str(&format!("|{}\n", "---|".repeat(cols)));
        for (m, metric) in table.metrics.iter().enumerate() {
            let d = metric_decimals(metric);
            out.push_str(&format!("| {metric} |"));
            for v in &table.means[m] {
                out.push_str(&format!(" {} |", cell(*v, d)));
            }
            if table.has_change_column() {
                let shown: Vec<f64> = table.means[m].iter().map(|v| round_to(*v, d as i32)).collect();
                out.push_str(&format!(" {} |", format_change(relative_change(shown[0], shown[1]))));
            }
            out.push('\n');
        }
    } else {
        let label = if table.experiment == 5 { "Method" } else { "Direction" };
        out.push_str(&format!("| {label} |"));
        for m in &table.metrics {
            out.push_str(&format!(" {m} |"));
        }
        out.push('\n');
        out.push_str(&format!("|{}\n", "---|".repeat(table.metrics.len() + 1)));
        for (c, condition) in table.conditions.iter().enumerate() {
            out.push_str(&format!("| {condition} |"));
            for (m, metric) in table.metrics.iter().enumerate() {
                out.push_str(&format!(" {} |", cell(table.means[m][c], metric_decimals(metric))));
            }
            out.push('\n');
        }
    }
    out.push_str(&format!(
        "\nScenarios per condition: {}.\n",
        table.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
    ));
    match table.experiment {
        1 => out.push_str(
            "The single-agent baseline is the unmodified prompt, so its word count is the prompt length. \
             The word-count change is computed from this table's own means.\n",
        ),
        5 => out.push_str("Per-method timings are in `exp5_fusion.csv`.\n"),
        _ => {}
    }
    out
}

pub fn render_report(tables: &[SummaryTable]) -> String {
    let mut out = String::from("# Experiment report\n");
    for t in tables {
        out.push('\n');
        out.push_str(&render_markdown(t));
    }
    out
}

pub const SUMMARY_CSV_HEADER: &str = "experiment,condition,metric,value";

/// Long-format summary: one row per (condition, metric) mean, plus
/// `change_pct` rows for the two-condition experiments.
pub fn render_summary_csv(tables: &[SummaryTable]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for t in tables {
        for (m, metric) in t.metrics.iter().enumerate() {
            for (c, condition) in t.conditions.iter().enumerate() {
                out.push_str(&format!("{},{condition},{metric},{}\n", t.experiment, t.means[m][c]));
            }
            if let Some(change) = &t.change {
                out.push_str(&format!("{},change_pct,{metric},{}\n", t.experiment, change[m].unwrap_or(f64::NAN)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn change_formatting() {
        assert_eq!(format_change(relative_change(0.769, 0.233)), "-69.7");
        assert_eq!(format_change(relative_change(9.0, 121.6)), "+1251.1");
        assert_eq!(format_change(relative_change(0.0, 1.0)), "n/a");
        assert_eq!(format_change(Some(0.0)), "0.0");
    }

    #[test]
    fn aggregate_rejects_mixed_or_empty() {
        assert!(aggregate(&[]).is_err());
    }
}
