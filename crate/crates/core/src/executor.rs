//! Enacts selection decisions and runs (synthetic) inference on frames.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{frame_confidence, FrameMetrics, ModelId, SelectionDecision, SwitchEvent};
use crate::error::{Error, Result};
use crate::knowledge::{LogRegistry, ModelRepository};
use crate::monitor::Monitor;
use crate::sim::{synth_inference, ModelProfile, SimFrame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutorConfig {
    /// Detections below this confidence are discarded in post-processing.
    #[serde(default = "default_floor")]
    pub confidence_floor: f64,
    /// Relative half-width of the uniform jitter applied to switch latency.
    #[serde(default = "default_jitter")]
    pub switch_jitter: f64,
    /// Model active before the first decision; the first declared model when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_model: Option<ModelId>,
}

fn default_floor() -> f64 {
    0.25
}

fn default_jitter() -> f64 {
    0.1
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self {
            confidence_floor: default_floor(),
            switch_jitter: default_jitter(),
            initial_model: None,
        }
    }
}

impl ExecutorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return Err(Error::Config(format!(
                "confidence_floor {} outside [0, 1]",
                self.confidence_floor
            )));
        }
        if !(0.0..1.0).contains(&self.switch_jitter) {
            return Err(Error::Config(format!(
                "switch_jitter {} outside [0, 1)",
                self.switch_jitter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorState {
    pub active: ModelId,
    pub last_switch_frame: Option<u64>,
    pub cumulative_switch_time_ms: f64,
    pub switch_count: u64,
}

impl ExecutorState {
    pub fn new(active: ModelId) -> Self {
        Self {
            active,
            last_switch_frame: None,
            cumulative_switch_time_ms: 0.0,
            switch_count: 0,
        }
    }

    /// Mean switch latency, 0 when no switch happened.
    pub fn average_switch_time_ms(&self) -> f64 {
        if self.switch_count == 0 {
            0.0
        } else {
            self.cumulative_switch_time_ms / self.switch_count as f64
        }
    }
}

/// Latency of activating `profile`: its base latency with uniform relative
/// jitter in `[-jitter, +jitter)`.
pub fn switch_latency<R: Rng + ?Sized>(profile: &ModelProfile, jitter: f64, rng: &mut R) -> f64 {
    if jitter == 0.0 {
        return profile.switch_latency_ms;
    }
    let u = rng.random::<f64>() * 2.0 - 1.0;
    profile.switch_latency_ms * (1.0 + jitter * u)
}

/// Applies `decision` at `frame_index`. A change of model deactivates the
/// current one and pays the incoming model's switch latency.
pub fn apply<R: Rng + ?Sized>(
    decision: &SelectionDecision,
    state: &ExecutorState,
    repo: &ModelRepository,
    frame_index: u64,
    jitter: f64,
    rng: &mut R,
) -> Result<(ExecutorState, Option<SwitchEvent>)> {
    let incoming = repo.get(&decision.selected)?;
    if decision.selected == state.active {
        return Ok((state.clone(), None));
    }
    let latency = switch_latency(incoming, jitter, rng);
    let event = SwitchEvent {
        frame_index,
        from: state.active.clone(),
        to: decision.selected.clone(),
        switch_time_ms: latency,
    };
    let next = ExecutorState {
        active: decision.selected.clone(),
        last_switch_frame: Some(frame_index),
        cumulative_switch_time_ms: state.cumulative_switch_time_ms + latency,
        switch_count: state.switch_count + 1,
    };
    Ok((next, Some(event)))
}

/// Runs `profile` on `frame`, drops detections under the confidence floor and
/// reduces the rest to frame metrics.
pub fn run_inference<R: Rng + ?Sized>(
    frame: &SimFrame,
    profile: &ModelProfile,
    confidence_floor: f64,
    rng: &mut R,
) -> FrameMetrics {
    let mut out = synth_inference(frame, profile, rng);
    out.detections.retain(|d| d.confidence >= confidence_floor);
    FrameMetrics {
        frame_index: frame.frame_index,
        model: profile.id.clone(),
        confidence_score: frame_confidence(&out.detections),
        cpu_usage: out.cpu_usage,
        detection_count: out.detections.len() as u32,
        inference_time_ms: out.inference_time_ms,
    }
}

/// The execute stage: owns the active-model state and its RNG streams.
#[derive(Debug, Clone)]
pub struct Executor<R> {
    config: ExecutorConfig,
    state: ExecutorState,
    inference_rng: R,
    switch_rng: R,
}

impl<R: Rng> Executor<R> {
    pub fn new(config: ExecutorConfig, initial: ModelId, inference_rng: R, switch_rng: R) -> Self {
        Self {
            config,
            state: ExecutorState::new(initial),
            inference_rng,
            switch_rng,
        }
    }

    pub fn state(&self) -> &ExecutorState {
        &self.state
    }

    pub fn active(&self) -> &ModelId {
        &self.state.active
    }

    /// Processes one frame with the active model and feeds the result to the
    /// monitor, which also logs it.
    pub fn process_frame(
        &mut self,
        frame: &SimFrame,
        repo: &ModelRepository,
        monitor: &mut Monitor,
        log: &mut LogRegistry,
        sim_time_ms: f64,
    ) -> Result<FrameMetrics> {
        let profile = repo.get(&self.state.active)?;
        let metrics = run_inference(
            frame,
            profile,
            self.config.confidence_floor,
            &mut self.inference_rng,
        );
        monitor.record(metrics.clone(), sim_time_ms, log)?;
        Ok(metrics)
    }

    pub fn enact(
        &mut self,
        decision: &SelectionDecision,
        repo: &ModelRepository,
        frame_index: u64,
    ) -> Result<Option<SwitchEvent>> {
        let (next, event) = apply(
            decision,
            &self.state,
            repo,
            frame_index,
            self.config.switch_jitter,
            &mut self.switch_rng,
        )?;
        self.state = next;
        Ok(event)
    }
}
