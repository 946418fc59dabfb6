//! Per-model sliding windows over the monitored frame metrics.

use std::collections::{BTreeMap, VecDeque};

use crate::domain::{FrameMetrics, ModelId, WindowAggregate};
use crate::error::{Error, Result};
use crate::knowledge::LogRegistry;

pub const DEFAULT_WINDOW: usize = 30;

/// FIFO of the last `capacity` frames processed by one model.
#[derive(Debug, Clone)]
pub struct MetricsWindow {
    model: ModelId,
    capacity: usize,
    entries: VecDeque<FrameMetrics>,
    last_frame: Option<u64>,
}

impl MetricsWindow {
    pub fn new(model: ModelId, capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            model,
            capacity,
            entries: VecDeque::with_capacity(capacity),
            last_frame: None,
        }
    }

    pub fn model(&self) -> &ModelId {
        &self.model
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &FrameMetrics> {
        self.entries.iter()
    }

    fn push(&mut self, metrics: FrameMetrics) -> Result<()> {
        if let Some(last) = self.last_frame {
            if metrics.frame_index <= last {
                return Err(Error::OutOfOrderFrame {
                    model: self.model.clone(),
                    frame_index: metrics.frame_index,
                    last,
                });
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.last_frame = Some(metrics.frame_index);
        self.entries.push_back(metrics);
        Ok(())
    }

    /// Means over whatever the window currently holds; partial windows are
    /// averaged over the samples present.
    pub fn aggregate(&self) -> Option<WindowAggregate> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len() as f64;
        let (conf, cpu) = self.entries.iter().fold((0.0, 0.0), |(c, u), m| {
            (c + m.confidence_score, u + m.cpu_usage)
        });
        Some(WindowAggregate {
            model: self.model.clone(),
            avg_confidence: conf / n,
            avg_cpu: cpu / n,
            sample_count: self.entries.len(),
        })
    }
}

/// Collects frame metrics for every registered model.
#[derive(Debug, Clone)]
pub struct Monitor {
    windows: BTreeMap<ModelId, MetricsWindow>,
}

impl Monitor {
    pub fn new<'a>(models: impl IntoIterator<Item = &'a ModelId>, capacity: usize) -> Self {
        let windows = models
            .into_iter()
            .map(|id| (id.clone(), MetricsWindow::new(id.clone(), capacity)))
            .collect();
        Self { windows }
    }

    /// Appends a frame to its model's window and to the log registry.
    pub fn record(
        &mut self,
        metrics: FrameMetrics,
        sim_time_ms: f64,
        log: &mut LogRegistry,
    ) -> Result<()> {
        let window = self
            .windows
            .get_mut(&metrics.model)
            .ok_or_else(|| Error::UnknownModel(metrics.model.clone()))?;
        window.push(metrics.clone())?;
        log.push_frame(metrics, sim_time_ms);
        Ok(())
    }

    pub fn aggregate(&self, model: &ModelId) -> Result<Option<WindowAggregate>> {
        self.window(model).map(MetricsWindow::aggregate)
    }

    pub fn window(&self, model: &ModelId) -> Result<&MetricsWindow> {
        self.windows
            .get(model)
            .ok_or_else(|| Error::UnknownModel(model.clone()))
    }
}
