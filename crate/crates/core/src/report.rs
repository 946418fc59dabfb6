//! Run summaries, usage-fairness metrics and the cross-run comparison table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::domain::ModelId;
use crate::engine::{EVENTS_FILE, METRICS_FILE, SUMMARY_FILE};
use crate::error::{Error, Result};
use crate::knowledge::{read_events_csv, read_metrics_csv, EventRow, LogRegistry, ModelRepository};

/// Largest entry of a share distribution, 0 for an empty one.
pub fn max_share(shares: &[f64]) -> f64 {
    shares.iter().copied().fold(0.0, f64::max)
}

/// Shannon entropy of `shares` divided by `ln(k)` for `k` categories, so a
/// uniform split scores 1 and total concentration scores 0. A single
/// category counts as perfectly even.
pub fn normalized_entropy(shares: &[f64]) -> f64 {
    match shares.len() {
        0 => 0.0,
        1 => 1.0,
        k => {
            let h: f64 = shares
                .iter()
                .filter(|&&s| s > 0.0)
                .map(|&s| -s * s.ln())
                .sum();
            h / (k as f64).ln()
        }
    }
}

pub fn shares(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    counts
        .iter()
        .map(|&c| {
            if total == 0 {
                0.0
            } else {
                c as f64 / total as f64
            }
        })
        .collect()
}

/// Headline numbers of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub strategy: String,
    pub seed: u64,
    pub frames_total: u64,
    pub frames_processed: u64,
    pub decision_count: u64,
    pub switch_count: u64,
    pub avg_cpu_pct: f64,
    /// Mean per-frame confidence, as a percentage.
    pub avg_confidence_pct: f64,
    pub avg_switch_time_s: f64,
    /// Processed frames per model, in repository order.
    pub usage: Vec<(ModelId, u64)>,
}

/// Statistics that can be recomputed from the emitted CSV files alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LogStats {
    pub frames_processed: u64,
    pub decision_count: u64,
    pub switch_count: u64,
    pub avg_cpu_pct: f64,
    pub avg_confidence_pct: f64,
    pub avg_switch_time_s: f64,
    pub usage: BTreeMap<ModelId, u64>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

impl RunSummary {
    pub fn from_log(
        strategy: &str,
        seed: u64,
        frames_total: u64,
        decision_count: u64,
        repo: &ModelRepository,
        log: &LogRegistry,
    ) -> Self {
        let mut usage: Vec<(ModelId, u64)> = repo.ids().map(|id| (id.clone(), 0)).collect();
        for frame in log.frames() {
            if let Some(slot) = usage.iter_mut().find(|(id, _)| id == &frame.model) {
                slot.1 += 1;
            }
        }
        let frames_processed = usage.iter().map(|(_, c)| c).sum();
        Self {
            strategy: strategy.to_string(),
            seed,
            frames_total,
            frames_processed,
            decision_count,
            switch_count: log.switches().count() as u64,
            avg_cpu_pct: mean(log.frames().map(|m| m.cpu_usage)),
            avg_confidence_pct: 100.0 * mean(log.frames().map(|m| m.confidence_score)),
            avg_switch_time_s: mean(log.switches().map(|e| e.switch_time_ms)) / 1000.0,
            usage,
        }
    }

    pub fn shares(&self) -> Vec<f64> {
        shares(&self.usage.iter().map(|(_, c)| *c).collect::<Vec<_>>())
    }

    pub fn max_share(&self) -> f64 {
        max_share(&self.shares())
    }

    pub fn normalized_entropy(&self) -> f64 {
        normalized_entropy(&self.shares())
    }

    pub fn frames_dropped(&self) -> u64 {
        self.frames_total.saturating_sub(self.frames_processed)
    }

    /// Flat `key=value` lines, one per statistic.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("strategy", self.strategy.clone());
        kv("seed", self.seed.to_string());
        kv("frames_total", self.frames_total.to_string());
        kv("frames_processed", self.frames_processed.to_string());
        kv("frames_dropped", self.frames_dropped().to_string());
        kv("decision_count", self.decision_count.to_string());
        kv("switch_count", self.switch_count.to_string());
        kv("avg_cpu_pct", format!("{:.4}", self.avg_cpu_pct));
        kv(
            "avg_confidence_pct",
            format!("{:.4}", self.avg_confidence_pct),
        );
        kv(
            "avg_switch_time_s",
            format!("{:.4}", self.avg_switch_time_s),
        );
        kv("max_share", format!("{:.4}", self.max_share()));
        kv(
            "normalized_entropy",
            format!("{:.4}", self.normalized_entropy()),
        );
        for ((id, count), share) in self.usage.iter().zip(self.shares()) {
            kv(&format!("usage.{id}"), count.to_string());
            kv(&format!("share.{id}"), format!("{share:.4}"));
        }
        out
    }

    pub fn from_kv(text: &str, source: &Path) -> Result<Self> {
        let bad = |message: String| Error::MalformedLog {
            path: source.to_path_buf(),
            message,
        };
        let mut fields = BTreeMap::new();
        let mut usage = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line without '=': {line:?}")))?;
            if let Some(model) = key.strip_prefix("usage.") {
                let id =
                    ModelId::new(model).ok_or_else(|| bad(format!("bad model id {model:?}")))?;
                let count = value
                    .parse()
                    .map_err(|_| bad(format!("bad count {value:?}")))?;
                usage.push((id, count));
            } else {
                fields.insert(key.to_string(), value.to_string());
            }
        }
        let get = |k: &str| fields.get(k).ok_or_else(|| bad(format!("missing key {k}")));
        fn num<T: std::str::FromStr>(
            raw: &str,
            key: &str,
            bad: impl Fn(String) -> Error,
        ) -> Result<T> {
            raw.parse()
                .map_err(|_| bad(format!("bad value for {key}: {raw:?}")))
        }
        Ok(Self {
            strategy: get("strategy")?.clone(),
            seed: num(get("seed")?, "seed", bad)?,
            frames_total: num(get("frames_total")?, "frames_total", bad)?,
            frames_processed: num(get("frames_processed")?, "frames_processed", bad)?,
            decision_count: num(get("decision_count")?, "decision_count", bad)?,
            switch_count: num(get("switch_count")?, "switch_count", bad)?,
            avg_cpu_pct: num(get("avg_cpu_pct")?, "avg_cpu_pct", bad)?,
            avg_confidence_pct: num(get("avg_confidence_pct")?, "avg_confidence_pct", bad)?,
            avg_switch_time_s: num(get("avg_switch_time_s")?, "avg_switch_time_s", bad)?,
            usage,
        })
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(SUMMARY_FILE);
        if !path.is_file() {
            return Err(Error::MissingRun(run_dir.to_path_buf()));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_kv(&text, &path)
    }

    /// Human-readable run report with the model-usage distribution.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "strategy                     {}", self.strategy);
        let _ = writeln!(out, "seed                         {}", self.seed);
        let _ = writeln!(
            out,
            "frames processed             {} of {} ({} dropped during switches)",
            self.frames_processed,
            self.frames_total,
            self.frames_dropped()
        );
        let _ = writeln!(out, "average CPU usage (%)        {:.2}", self.avg_cpu_pct);
        let _ = writeln!(
            out,
            "average accuracy (%)         {:.2}",
            self.avg_confidence_pct
        );
        let _ = writeln!(
            out,
            "average switching time (s)   {:.2}",
            self.avg_switch_time_s
        );
        let _ = writeln!(
            out,
            "switches / decisions         {} / {}",
            self.switch_count, self.decision_count
        );
        let _ = writeln!(out, "battery (mAh)                n/a");
        let _ = writeln!(out, "max share                    {:.4}", self.max_share());
        let _ = writeln!(
            out,
            "normalized entropy           {:.4}",
            self.normalized_entropy()
        );
        out.push('\n');
        out.push_str(&render_usage(self));
        out
    }
}

fn render_usage(summary: &RunSummary) -> String {
    const BAR: usize = 40;
    let width = summary
        .usage
        .iter()
        .map(|(id, _)| id.as_str().len())
        .max()
        .unwrap_or(0);
    let mut out = String::from("model usage\n");
    for ((id, count), share) in summary.usage.iter().zip(summary.shares()) {
        let bar = "#".repeat((share * BAR as f64).round() as usize);
        let _ = writeln!(
            out,
            "  {:<width$}  {count:>7}  {:>6.2}%  {bar}",
            id.as_str(),
            share * 100.0
        );
    }
    out
}

/// Recomputes the headline statistics of a run directory from its CSVs.
pub fn recompute_from_csv(run_dir: &Path) -> Result<LogStats> {
    let frames = read_metrics_csv(&run_dir.join(METRICS_FILE))?;
    let events = read_events_csv(&run_dir.join(EVENTS_FILE))?;
    let mut usage = BTreeMap::new();
    for row in &frames {
        *usage.entry(row.metrics.model.clone()).or_insert(0) += 1;
    }
    let switch_times: Vec<f64> = events
        .iter()
        .filter_map(|e| match e {
            EventRow::Switch { switch_time_ms, .. } => Some(*switch_time_ms),
            _ => None,
        })
        .collect();
    Ok(LogStats {
        frames_processed: frames.len() as u64,
        decision_count: events
            .iter()
            .filter(|e| matches!(e, EventRow::Decision { .. }))
            .count() as u64,
        switch_count: switch_times.len() as u64,
        avg_cpu_pct: mean(frames.iter().map(|r| r.metrics.cpu_usage)),
        avg_confidence_pct: 100.0 * mean(frames.iter().map(|r| r.metrics.confidence_score)),
        avg_switch_time_s: mean(switch_times.into_iter()) / 1000.0,
        usage,
    })
}

/// Column titles of the comparison table, in order.
pub const COMPARISON_COLUMNS: [&str; 6] = [
    "Frames Processed",
    "Average CPU Usage (%)",
    "Average Accuracy (%)",
    "Average Switching Time (s)",
    "Max Share",
    "Normalized Entropy",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub values: [f64; 6],
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn from_summaries(summaries: Vec<RunSummary>) -> Self {
        let rows = summaries
            .into_iter()
            .map(|s| ComparisonRow {
                label: format!("{} (seed {})", s.strategy, s.seed),
                values: [
                    s.frames_processed as f64,
                    s.avg_cpu_pct,
                    s.avg_confidence_pct,
                    s.avg_switch_time_s,
                    s.max_share(),
                    s.normalized_entropy(),
                ],
                summary: s,
            })
            .collect();
        Self { rows }
    }

    pub fn columns(&self) -> &'static [&'static str] {
        &COMPARISON_COLUMNS
    }

    /// Aligned text table followed by each run's usage distribution. Battery
    /// consumption is not simulated and shows as `n/a`.
    pub fn render(&self) -> String {
        let mut header: Vec<String> = vec!["Approach".to_string()];
        header.extend(COMPARISON_COLUMNS[..4].iter().map(|s| s.to_string()));
        header.push("Battery (mAh)".to_string());
        header.extend(COMPARISON_COLUMNS[4..].iter().map(|s| s.to_string()));

        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let v = &row.values;
                vec![
                    row.label.clone(),
                    format!("{}", v[0] as u64),
                    format!("{:.2}", v[1]),
                    format!("{:.2}", v[2]),
                    format!("{:.2}", v[3]),
                    "n/a".to_string(),
                    format!("{:.4}", v[4]),
                    format!("{:.4}", v[5]),
                ]
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                cells
                    .iter()
                    .map(|r| r[i].len())
                    .chain(std::iter::once(header[i].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();

        let mut out = String::new();
        let line = |out: &mut String, row: &[String]| {
            let joined: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (cell, w))| {
                    if i == 0 {
                        format!("{cell:<w$}")
                    } else {
                        format!("{cell:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", joined.join("  ").trim_end());
        };
        line(&mut out, &header);
        let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
        line(&mut out, &rule);
        for row in &cells {
            line(&mut out, row);
        }
        for row in &self.rows {
            let _ = write!(out, "\n{}\n", row.label);
            out.push_str(&render_usage(&row.summary));
        }
        out
    }
}

/// Loads the summaries of completed run directories into one table.
pub fn compare(run_dirs: &[PathBuf]) -> Result<ComparisonReport> {
    if run_dirs.len() < 2 {
        return Err(Error::Config(
            "compare needs at least two run directories".into(),
        ));
    }
    let summaries = run_dirs
        .iter()
        .map(|dir| RunSummary::load(dir))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport::from_summaries(summaries))
}
