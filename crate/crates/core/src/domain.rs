//! Value types shared by every stage of the control loop.
//!
//! Percentages (CPU usage) are carried in `[0, 100]`; confidences are
//! fractions in `[0, 1]`. Conversions only happen when values are logged or
//! reported.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a deployed detection model, e.g. `efficientdet-lite0`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelId(String);

impl ModelId {
    /// Returns `None` for an empty or whitespace-only name.
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        if name.trim().is_empty() || name.contains(',') {
            None
        } else {
            Some(Self(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ModelId {
    type Error = String;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ModelId::new(value.clone()).ok_or_else(|| format!("invalid model id {value:?}"))
    }
}

impl From<ModelId> for String {
    fn from(id: ModelId) -> Self {
        id.0
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Axis-aligned box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

/// One object reported by a detector after post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub confidence: f64,
    pub class_label: String,
    pub bbox: BoundingBox,
}

/// The monitored tuple for one processed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMetrics {
    pub frame_index: u64,
    pub model: ModelId,
    /// Mean detection confidence, 0 when nothing was detected.
    pub confidence_score: f64,
    /// CPU usage in percent.
    pub cpu_usage: f64,
    pub detection_count: u32,
    pub inference_time_ms: f64,
}

/// Means over a model's retained window of frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAggregate {
    pub model: ModelId,
    pub avg_confidence: f64,
    pub avg_cpu: f64,
    pub sample_count: usize,
}

/// Performance score of one model. Lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub model: ModelId,
    pub value: f64,
    pub computed_at_frame: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecisionMode {
    Explore,
    Exploit,
    Forced,
}

impl DecisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionMode::Explore => "explore",
            DecisionMode::Exploit => "exploit",
            DecisionMode::Forced => "forced",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "explore" => Some(DecisionMode::Explore),
            "exploit" => Some(DecisionMode::Exploit),
            "forced" => Some(DecisionMode::Forced),
            _ => None,
        }
    }
}

/// Output of a planning step: which model should run next and why.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionDecision {
    pub selected: ModelId,
    pub mode: DecisionMode,
    /// The uniform draw compared against epsilon, when one was made.
    pub random_draw: Option<f64>,
    pub previous: ModelId,
}

/// Emitted by the executor whenever the active model changes.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub frame_index: u64,
    pub from: ModelId,
    pub to: ModelId,
    pub switch_time_ms: f64,
}

/// Mean confidence of a frame's detections; 0 for a frame with no detections.
pub fn frame_confidence(detections: &[Detection]) -> f64 {
    if detections.is_empty() {
        return 0.0;
    }
    let sum: f64 = detections.iter().map(|d| d.confidence).sum();
    sum / detections.len() as f64
}

#[cfg(test)]
pub(crate) fn detection(confidence: f64) -> Detection {
    Detection {
        confidence,
        class_label: "car".to_string(),
        bbox: BoundingBox {
            x: 0.1,
            y: 0.1,
            w: 0.2,
            h: 0.2,
        },
    }
}
