//! Aggregation and the CSV and markdown emitters.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::baselines::MethodId;

use super::TrialRecord;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no trial records to aggregate")]
    Empty,
    #[error("malformed markdown table: {0}")]
    Markdown(String),
}

/// Aggregates of one (scene, method) group.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub scene: String,
    pub method: MethodId,
    pub trials: usize,
    pub successes: usize,
    pub success_pct: f64,
    /// Over successful trials; absent when there are none.
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    /// Over all trials.
    pub time_mean: f64,
    pub time_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub base_seed: u64,
    /// Sorted by scene, then method.
    pub rows: Vec<MethodSummary>,
}

/// Mean and sample standard deviation (zero for a single value).
fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

pub fn aggregate(records: &[TrialRecord], base_seed: u64) -> Result<BenchReport, ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut groups: BTreeMap<(&str, MethodId), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.scene.as_str(), r.method))
            .or_default()
            .push(r);
    }
    let rows = groups
        .into_iter()
        .map(|((scene, method), rs)| {
            let costs: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.cost.filter(|_| r.success))
                .collect();
            let times: Vec<f64> = rs.iter().map(|r| r.wall_time).collect();
            let cost = mean_std(&costs);
            let (time_mean, time_std) = mean_std(&times).expect("groups are non-empty");
            MethodSummary {
                scene: scene.to_string(),
                method,
                trials: rs.len(),
                successes: costs.len(),
                success_pct: 100.0 * costs.len() as f64 / rs.len() as f64,
                cost_mean: cost.map(|c| c.0),
                cost_std: cost.map(|c| c.1),
                time_mean,
                time_std,
            }
        })
        .collect();
    Ok(BenchReport { base_seed, rows })
}

/// Column order of [`BenchReport::to_csv`].
pub const CSV_COLUMNS: [&str; 8] = [
    "scene",
    "method",
    "trials",
    "success_pct",
    "cost_mean",
    "cost_std",
    "time_mean_s",
    "time_std_s",
];

/// Columns holding wall-clock measurements.
pub const CSV_TIME_COLUMNS: [&str; 2] = ["time_mean_s", "time_std_s"];

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |v| format!("{v:.digits$}"))
}

impl BenchReport {
    pub fn summary(&self, scene: &str, method: MethodId) -> Option<&MethodSummary> {
        self.rows
            .iter()
            .find(|r| r.scene == scene && r.method == method)
    }

    pub fn scenes(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.rows.iter().map(|r| r.scene.as_str()).collect();
        v.dedup();
        v
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.scene.clone(),
                r.method.to_string(),
                r.trials.to_string(),
                format!("{:.1}", r.success_pct),
                opt(r.cost_mean, 6),
                opt(r.cost_std, 6),
                format!("{:.6}", r.time_mean),
                format!("{:.6}", r.time_std),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Methods as rows, one (success, cost, time) column group per scene.
    pub fn to_markdown(&self) -> String {
        let scenes = self.scenes();
        let mut methods: Vec<MethodId> = self.rows.iter().map(|r| r.method).collect();
        methods.sort();
        methods.dedup();

        let mut out = String::from("| Method |");
        for s in &scenes {
            out.push_str(&format!(" {s} Succ. (%) | {s} Cost | {s} Time (s) |"));
        }
        out.push_str("\n|---|");
        out.push_str(&"---:|".repeat(3 * scenes.len()));
        out.push('\n');
        for m in methods {
            out.push_str(&format!("| {m} |"));
            for s in &scenes {
                match self.summary(s, m) {
                    Some(r) => out.push_str(&format!(
                        " {:.1} | {} | {:.3} |",
                        r.success_pct,
                        r.cost_mean
                            .map_or_else(|| "-".to_string(), |c| format!("{c:.4}")),
                        r.time_mean
                    )),
                    None => out.push_str(" | | |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One cell group recovered from a markdown table.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkdownEntry {
    pub scene: String,
    pub method: MethodId,
    pub success_pct: f64,
    pub cost_mean: Option<f64>,
    pub time_mean: f64,
}

/// Parses the output of [`BenchReport::to_markdown`].
pub fn parse_markdown(text: &str) -> Result<Vec<MarkdownEntry>, ReportError> {
    let bad = |m: &str| ReportError::Markdown(m.to_string());
    let cells = |line: &str| -> Vec<String> {
        let t = line.trim().trim_start_matches('|').trim_end_matches('|');
        t.split('|').map(|c| c.trim().to_string()).collect()
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = cells(lines.next().ok_or_else(|| bad("missing header"))?);
    if header.first().map(String::as_str) != Some("Method") || (header.len() - 1) % 3 != 0 {
        return Err(bad("unexpected header"));
    }
    let scenes: Vec<String> = header[1..]
        .chunks(3)
        .map(|c| {
            c[0].strip_suffix(" Succ. (%)")
                .map(str::to_string)
                .ok_or_else(|| bad("bad scene column"))
        })
        .collect::<Result<_, _>>()?;
    lines.next().ok_or_else(|| bad("missing separator"))?;

    let mut out = vec![];
    for line in lines {
        let row = cells(line);
        if row.len() != header.len() {
            return Err(bad("row width differs from header"));
        }
        let method: MethodId = row[0]
            .parse()
            .map_err(|e: String| ReportError::Markdown(e))?;
        for (scene, c) in scenes.iter().zip(row[1..].chunks(3)) {
            if c[0].is_empty() {
                continue;
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
            out.push(MarkdownEntry {
                scene: scene.clone(),
                method,
                success_pct: num(&c[0])?,
                cost_mean: if c[1] == "-" { None } else { Some(num(&c[1])?) },
                time_mean: num(&c[2])?,
            });
        }
    }
    Ok(out)
}
