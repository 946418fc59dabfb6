//! Shared knowledge: the model repository, the score table and the
//! append-only log registry, plus the CSV log format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::domain::{DecisionMode, FrameMetrics, ModelId, Score, SelectionDecision, SwitchEvent};
use crate::error::{Error, Result};
use crate::sim::ModelProfile;

pub const METRICS_HEADER: &str =
    "frame_index,sim_time_ms,model_id,cpu_usage_pct,confidence,detection_count,inference_time_ms,battery_mah";
pub const EVENTS_HEADER: &str =
    "frame_index,event_type,mode,random_draw,from_model,to_model,switch_time_ms";

/// Registered models, kept in declaration order.
#[derive(Debug, Clone)]
pub struct ModelRepository {
    models: Vec<ModelProfile>,
}

impl ModelRepository {
    pub fn new(models: Vec<ModelProfile>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::EmptyRepository);
        }
        for (i, m) in models.iter().enumerate() {
            if models[..i].iter().any(|other| other.id == m.id) {
                return Err(Error::DuplicateModel(m.id.clone()));
            }
        }
        Ok(Self { models })
    }

    pub fn get(&self, id: &ModelId) -> Result<&ModelProfile> {
        self.models
            .iter()
            .find(|m| &m.id == id)
            .ok_or_else(|| Error::UnknownModel(id.clone()))
    }

    pub fn contains(&self, id: &ModelId) -> bool {
        self.models.iter().any(|m| &m.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &ModelId> {
        self.models.iter().map(|m| &m.id)
    }

    pub fn profiles(&self) -> &[ModelProfile] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Latest performance score per model. Iteration order is lexicographic by
/// model id, which is also the tie-break order for equal scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    entries: BTreeMap<ModelId, Score>,
    writes: u64,
}

impl ScoreTable {
    /// One entry per model, each at `initial_value`.
    pub fn new<'a>(models: impl IntoIterator<Item = &'a ModelId>, initial_value: f64) -> Self {
        let entries = models
            .into_iter()
            .map(|id| {
                let score = Score {
                    model: id.clone(),
                    value: initial_value,
                    computed_at_frame: 0,
                };
                (id.clone(), score)
            })
            .collect();
        Self { entries, writes: 0 }
    }

    /// Builds a table straight from `(model, value)` pairs.
    pub fn from_values<'a>(values: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (name, value) in values {
            let id = ModelId::new(name)
                .ok_or_else(|| Error::Config(format!("bad model id {name:?}")))?;
            entries.insert(
                id.clone(),
                Score {
                    model: id,
                    value,
                    computed_at_frame: 0,
                },
            );
        }
        Ok(Self { entries, writes: 0 })
    }

    pub fn get(&self, id: &ModelId) -> Option<&Score> {
        self.entries.get(id)
    }

    pub fn set(&mut self, score: Score) -> Result<()> {
        let slot = self
            .entries
            .get_mut(&score.model)
            .ok_or_else(|| Error::UnknownModel(score.model.clone()))?;
        *slot = score;
        self.writes += 1;
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = &Score> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of `set` calls since construction.
    pub fn write_count(&self) -> u64 {
        self.writes
    }

    /// Model with the lowest score; ties go to the lexicographically
    /// smallest id.
    pub fn best(&self) -> Option<&ModelId> {
        let mut best: Option<&Score> = None;
        for score in self.entries.values() {
            match best {
                Some(b) if score.value >= b.value => {}
                _ => best = Some(score),
            }
        }
        best.map(|s| &s.model)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LogRecord {
    Frame {
        sim_time_ms: f64,
        metrics: FrameMetrics,
    },
    Decision {
        frame_index: u64,
        sim_time_ms: f64,
        decision: SelectionDecision,
    },
    Switch {
        sim_time_ms: f64,
        event: SwitchEvent,
    },
}

impl LogRecord {
    pub fn frame_index(&self) -> u64 {
        match self {
            LogRecord::Frame { metrics, .. } => metrics.frame_index,
            LogRecord::Decision { frame_index, .. } => *frame_index,
            LogRecord::Switch { event, .. } => event.frame_index,
        }
    }
}

/// Append-only run log. Frame indices never decrease.
#[derive(Debug, Clone, Default)]
pub struct LogRegistry {
    records: Vec<LogRecord>,
}

impl LogRegistry {
    fn push(&mut self, record: LogRecord) {
        if let Some(last) = self.records.last() {
            assert!(
                record.frame_index() >= last.frame_index(),
                "log registry is append-only in frame order"
            );
        }
        self.records.push(record);
    }

    pub fn push_frame(&mut self, metrics: FrameMetrics, sim_time_ms: f64) {
        self.push(LogRecord::Frame {
            sim_time_ms,
            metrics,
        });
    }

    pub fn push_decision(
        &mut self,
        frame_index: u64,
        sim_time_ms: f64,
        decision: SelectionDecision,
    ) {
        self.push(LogRecord::Decision {
            frame_index,
            sim_time_ms,
            decision,
        });
    }

    pub fn push_switch(&mut self, event: SwitchEvent, sim_time_ms: f64) {
        self.push(LogRecord::Switch { sim_time_ms, event });
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameMetrics> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Frame { metrics, .. } => Some(metrics),
            _ => None,
        })
    }

    pub fn decisions(&self) -> impl Iterator<Item = &SelectionDecision> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Decision { decision, .. } => Some(decision),
            _ => None,
        })
    }

    pub fn switches(&self) -> impl Iterator<Item = &SwitchEvent> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Switch { event, .. } => Some(event),
            _ => None,
        })
    }

    /// Writes the frame-metrics CSV to `metrics_path` and the decision and
    /// switch events CSV to `events_path`.
    pub fn export(&self, metrics_path: &Path, events_path: &Path) -> Result<()> {
        write_file(metrics_path, |out| {
            writeln!(out, "{METRICS_HEADER}")?;
            for record in &self.records {
                if let LogRecord::Frame {
                    sim_time_ms,
                    metrics,
                } = record
                {
                    writeln!(
                        out,
                        "{},{:.4},{},{:.4},{:.4},{},{:.4},",
                        metrics.frame_index,
                        sim_time_ms,
                        metrics.model,
                        metrics.cpu_usage,
                        metrics.confidence_score,
                        metrics.detection_count,
                        metrics.inference_time_ms,
                    )?;
                }
            }
            Ok(())
        })?;
        write_file(events_path, |out| {
            writeln!(out, "{EVENTS_HEADER}")?;
            for record in &self.records {
                match record {
                    LogRecord::Decision {
                        frame_index,
                        decision,
                        ..
                    } => {
                        let draw = decision
                            .random_draw
                            .map(|p| format!("{p:.4}"))
                            .unwrap_or_default();
                        writeln!(
                            out,
                            "{frame_index},decision,{},{draw},{},{},",
                            decision.mode.as_str(),
                            decision.previous,
                            decision.selected,
                        )?;
                    }
                    LogRecord::Switch { event, .. } => writeln!(
                        out,
                        "{},switch,,,{},{},{:.4}",
                        event.frame_index, event.from, event.to, event.switch_time_ms
                    )?,
                    LogRecord::Frame { .. } => {}
                }
            }
            Ok(())
        })
    }
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Everything the control loop shares between stages.
#[derive(Debug, Clone)]
pub struct Knowledge {
    pub repository: ModelRepository,
    pub scores: ScoreTable,
    pub log: LogRegistry,
}

impl Knowledge {
    pub fn new(repository: ModelRepository, initial_score: f64) -> Self {
        let scores = ScoreTable::new(repository.ids(), initial_score);
        Self {
            repository,
            scores,
            log: LogRegistry::default(),
        }
    }

    /// Immutable copy of the score table for one planning cycle.
    pub fn snapshot_scores(&self) -> ScoreTable {
        self.scores.clone()
    }

    pub fn export_log(&self, metrics_path: &Path, events_path: &Path) -> Result<()> {
        self.log.export(metrics_path, events_path)
    }
}

/// One parsed line of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub sim_time_ms: f64,
    pub metrics: FrameMetrics,
}

/// One parsed line of the events CSV.
#[derive(Debug, Clone, PartialEq)]
pub enum EventRow {
    Decision {
        frame_index: u64,
        mode: DecisionMode,
        random_draw: Option<f64>,
        from: ModelId,
        to: ModelId,
    },
    Switch {
        frame_index: u64,
        from: ModelId,
        to: ModelId,
        switch_time_ms: f64,
    },
}

fn open_csv(path: &Path, header: &str) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| malformed(path, e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(malformed(path, format!("unexpected header {found:?}")));
    }
    Ok(reader)
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::MalformedLog {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(path: &Path, record: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = record.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| malformed(path, format!("bad value {raw:?} in column {i}")))
}

fn model_field(path: &Path, record: &csv::StringRecord, i: usize) -> Result<ModelId> {
    let raw = record.get(i).unwrap_or("");
    ModelId::new(raw).ok_or_else(|| malformed(path, format!("bad model id {raw:?}")))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = open_csv(path, METRICS_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(path, e.to_string()))?;
        rows.push(MetricsRow {
            sim_time_ms: field(path, &record, 1)?,
            metrics: FrameMetrics {
                frame_index: field(path, &record, 0)?,
                model: model_field(path, &record, 2)?,
                cpu_usage: field(path, &record, 3)?,
                confidence_score: field(path, &record, 4)?,
                detection_count: field(path, &record, 5)?,
                inference_time_ms: field(path, &record, 6)?,
            },
        });
    }
    Ok(rows)
}

pub fn read_events_csv(path: &Path) -> Result<Vec<EventRow>> {
    let mut reader = open_csv(path, EVENTS_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| malformed(path, e.to_string()))?;
        let frame_index = field(path, &record, 0)?;
        let from = model_field(path, &record, 4)?;
        let to = model_field(path, &record, 5)?;
        let row = match record.get(1) {
            Some("decision") => {
                let mode_raw = record.get(2).unwrap_or("");
                let mode = DecisionMode::parse(mode_raw)
                    .ok_or_else(|| malformed(path, format!("bad mode {mode_raw:?}")))?;
                let random_draw = match record.get(3) {
                    Some("") | None => None,
                    Some(_) => Some(field(path, &record, 3)?),
                };
                EventRow::Decision {
                    frame_index,
                    mode,
                    random_draw,
                    from,
                    to,
                }
            }
            Some("switch") => EventRow::Switch {
                frame_index,
                from,
                to,
                switch_time_ms: field(path, &record, 6)?,
            },
            other => return Err(malformed(path, format!("bad event type {other:?}"))),
        };
        rows.push(row);
    }
    Ok(rows)
}
