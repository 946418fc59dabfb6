//! Turns monitored data into per-model performance scores.
//!
//! The score of model `m` after frame `i` is
//!
//! ```text
//! S = min(U_i, U_avg) * (1 - C_avg / C_i)
//! ```
//!
//! where `U` is CPU usage in percent and `C` is confidence. Only the ratio of
//! confidences enters, so `C` may be given as fractions or percentages as long
//! as both use the same unit. Lower scores are better: a negative score means
//! the current frame's confidence fell below the window average, and the CPU
//! factor scales how much that matters.

use crate::domain::{FrameMetrics, Score, WindowAggregate};
use crate::error::{Error, Result};
use crate::knowledge::ScoreTable;
use crate::monitor::Monitor;

/// Written in place of a score when the current confidence is zero, so that
/// exploitation never picks the model until it is explored again.
pub const ZERO_CONFIDENCE_SCORE: f64 = f64::MAX;

/// Score value of a model before it has processed any frame.
pub const DEFAULT_INITIAL_SCORE: f64 = 0.0;

pub fn performance_score(
    current_cpu: f64,
    current_confidence: f64,
    avg_cpu: f64,
    avg_confidence: f64,
) -> Result<f64> {
    if current_confidence == 0.0 {
        return Err(Error::ZeroConfidence);
    }
    Ok(current_cpu.min(avg_cpu) * (1.0 - avg_confidence / current_confidence))
}

pub fn compute_score(
    current_cpu: f64,
    current_confidence: f64,
    aggregate: &WindowAggregate,
) -> Result<f64> {
    performance_score(
        current_cpu,
        current_confidence,
        aggregate.avg_cpu,
        aggregate.avg_confidence,
    )
}

#[derive(Debug, Clone, Default)]
pub struct Analyzer;

impl Analyzer {
    /// Scores the frame's model from its latest frame and window, and writes
    /// the result into `scores`. Other models keep their previous entries.
    pub fn refresh_scores(
        &self,
        frame: &FrameMetrics,
        monitor: &Monitor,
        scores: &mut ScoreTable,
    ) -> Result<Score> {
        let aggregate = monitor
            .aggregate(&frame.model)?
            .ok_or_else(|| Error::UnknownModel(frame.model.clone()))?;
        let value = match compute_score(frame.cpu_usage, frame.confidence_score, &aggregate) {
            Ok(v) => v,
            Err(Error::ZeroConfidence) => ZERO_CONFIDENCE_SCORE,
            Err(e) => return Err(e),
        };
        let score = Score {
            model: frame.model.clone(),
            value,
            computed_at_frame: frame.frame_index,
        };
        scores.set(score.clone())?;
        Ok(score)
    }
}
