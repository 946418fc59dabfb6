//! Deterministic workload and synthetic inference.
//!
//! Every random quantity comes from a ChaCha8 stream seeded from a 64-bit
//! seed. Independent concerns draw from separate stream numbers of the same
//! seed so that, for instance, the trace is identical no matter which
//! strategy consumes it.
//!
//! Draw order inside [`synth_inference`] for one frame:
//! 1. per scene object: one uniform for the recall test, and for a detected
//!    object two uniforms (Box-Muller) for the confidence noise followed by
//!    four uniforms for the bounding box and one for the class label;
//! 2. two uniforms (Box-Muller) for the CPU noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, Detection, ModelId};
use crate::error::{Error, Result};

pub type SimRng = ChaCha8Rng;

/// Stream numbers carved out of one seed.
pub mod stream {
    pub const TRACE: u64 = 0;
    pub const INFERENCE: u64 = 1;
    pub const PLANNER: u64 = 2;
    pub const SWITCH: u64 = 3;
}

pub fn rng_for(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Standard normal sample scaled by `sd`, via the Box-Muller transform.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> f64 {
    // u1 in (0, 1] keeps ln finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    sd * (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Poisson sample by Knuth's product-of-uniforms method. Means above 30 are
/// split into a sum of independent Poisson pieces.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    const CHUNK: f64 = 30.0;
    let mut remaining = mean.max(0.0);
    let mut total = 0u32;
    while remaining > 0.0 {
        let lambda = remaining.min(CHUNK);
        remaining -= lambda;
        let limit = (-lambda).exp();
        let mut k = 0u32;
        let mut product = rng.random::<f64>();
        while product > limit {
            k += 1;
            product *= rng.random::<f64>();
        }
        total += k;
    }
    total
}

/// Synthetic characterization of one deployed detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelProfile {
    pub id: ModelId,
    pub base_cpu_pct: f64,
    pub cpu_per_object_pct: f64,
    pub base_confidence: f64,
    pub confidence_noise_sd: f64,
    pub detection_recall: f64,
    pub switch_latency_ms: f64,
    pub inference_time_ms: f64,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<()> {
        let fraction = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{}: {name} must be in [0, 1], got {v}",
                    self.id
                )))
            }
        };
        let percent = |name: &str, v: f64| {
            if (0.0..=100.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{}: {name} must be in [0, 100], got {v}",
                    self.id
                )))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{}: {name} must be positive, got {v}",
                    self.id
                )))
            }
        };
        percent("base_cpu_pct", self.base_cpu_pct)?;
        percent("cpu_per_object_pct", self.cpu_per_object_pct)?;
        fraction("base_confidence", self.base_confidence)?;
        fraction("confidence_noise_sd", self.confidence_noise_sd)?;
        fraction("detection_recall", self.detection_recall)?;
        positive("switch_latency_ms", self.switch_latency_ms)?;
        positive("inference_time_ms", self.inference_time_ms)
    }
}

#[allow(clippy::too_many_arguments)]
fn profile(
    id: &str,
    base_cpu_pct: f64,
    cpu_per_object_pct: f64,
    base_confidence: f64,
    confidence_noise_sd: f64,
    detection_recall: f64,
    switch_latency_ms: f64,
    inference_time_ms: f64,
) -> ModelProfile {
    ModelProfile {
        id: ModelId::new(id).expect("static id"),
        base_cpu_pct,
        cpu_per_object_pct,
        base_confidence,
        confidence_noise_sd,
        detection_recall,
        switch_latency_ms,
        inference_time_ms,
    }
}

/// The four-detector family used by default, lightest first.
pub fn default_profiles() -> Vec<ModelProfile> {
    vec![
        profile(
            "ssd-mobilenet-v1",
            14.0,
            0.25,
            0.45,
            0.04,
            0.85,
            300.0,
            28.0,
        ),
        profile(
            "efficientdet-lite0",
            17.0,
            0.25,
            0.55,
            0.06,
            0.85,
            500.0,
            37.0,
        ),
        profile(
            "efficientdet-lite1",
            20.0,
            0.30,
            0.62,
            0.08,
            0.85,
            700.0,
            49.0,
        ),
        profile(
            "efficientdet-lite2",
            24.0,
            0.35,
            0.68,
            0.10,
            0.85,
            900.0,
            69.0,
        ),
    ]
}

/// One piece of the density schedule, in force from `start_s` until the next
/// segment starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub mean_objects: f64,
    pub complexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    #[serde(default = "default_fps")]
    pub fps: u32,
    #[serde(default = "default_duration")]
    pub duration_s: u32,
    #[serde(default = "default_schedule", rename = "segment")]
    pub segments: Vec<Segment>,
    #[serde(default = "default_seed")]
    pub rng_seed: u64,
}

fn default_fps() -> u32 {
    60
}

fn default_duration() -> u32 {
    1800
}

pub const DEFAULT_SEED: u64 = 2024;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_schedule() -> Vec<Segment> {
    three_phase_schedule(default_duration())
}

/// Off-peak, rush hour, off-peak in three equal thirds of `duration_s`.
pub fn three_phase_schedule(duration_s: u32) -> Vec<Segment> {
    let third = f64::from(duration_s) / 3.0;
    vec![
        Segment {
            start_s: 0.0,
            mean_objects: 3.0,
            complexity: 0.2,
        },
        Segment {
            start_s: third,
            mean_objects: 12.0,
            complexity: 0.6,
        },
        Segment {
            start_s: 2.0 * third,
            mean_objects: 3.0,
            complexity: 0.2,
        },
    ]
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            fps: default_fps(),
            duration_s: default_duration(),
            segments: default_schedule(),
            rng_seed: DEFAULT_SEED,
        }
    }
}

impl TraceConfig {
    /// Default trace shortened (or stretched) to `duration_s`, keeping the
    /// three-phase density schedule.
    pub fn with_duration(duration_s: u32) -> Self {
        Self {
            duration_s,
            segments: three_phase_schedule(duration_s),
            ..Self::default()
        }
    }

    pub fn total_frames(&self) -> u64 {
        u64::from(self.fps) * u64::from(self.duration_s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSchedule(msg));
        if self.fps == 0 {
            return bad("fps must be positive".into());
        }
        if self.duration_s == 0 {
            return bad("duration_s must be positive".into());
        }
        let Some(first) = self.segments.first() else {
            return bad("schedule has no segments".into());
        };
        if first.start_s != 0.0 {
            return bad(format!(
                "first segment starts at {} instead of 0",
                first.start_s
            ));
        }
        for pair in self.segments.windows(2) {
            if pair[1].start_s.partial_cmp(&pair[0].start_s) != Some(std::cmp::Ordering::Greater) {
                return bad(format!(
                    "segment starts must strictly increase ({} then {})",
                    pair[0].start_s, pair[1].start_s
                ));
            }
        }
        for seg in &self.segments {
            if seg.start_s >= f64::from(self.duration_s) {
                return bad(format!(
                    "segment at {}s starts after the trace ends",
                    seg.start_s
                ));
            }
            if !seg.mean_objects.is_finite() || seg.mean_objects < 0.0 {
                return bad(format!(
                    "mean_objects {} is not a non-negative number",
                    seg.mean_objects
                ));
            }
            if !(0.0..=1.0).contains(&seg.complexity) {
                return bad(format!("complexity {} outside [0, 1]", seg.complexity));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimFrame {
    pub frame_index: u64,
    pub object_count: u32,
    /// Scene difficulty in [0, 1].
    pub complexity: f64,
}

pub type SimulationTrace = Vec<SimFrame>;

/// Generates the frame sequence: Poisson object counts around the active
/// segment's mean, complexity linearly interpolated from a segment's value
/// toward the next segment's value.
pub fn generate_trace(config: &TraceConfig) -> Result<SimulationTrace> {
    config.validate()?;
    let mut rng = rng_for(config.rng_seed, stream::TRACE);
    let fps = f64::from(config.fps);
    let segments = &config.segments;
    let mut seg = 0usize;
    let frames = (0..config.total_frames())
        .map(|frame_index| {
            let t = frame_index as f64 / fps;
            while seg + 1 < segments.len() && t >= segments[seg + 1].start_s {
                seg += 1;
            }
            let current = segments[seg];
            let complexity = match segments.get(seg + 1) {
                Some(next) => {
                    let span = next.start_s - current.start_s;
                    let frac = ((t - current.start_s) / span).clamp(0.0, 1.0);
                    current.complexity + (next.complexity - current.complexity) * frac
                }
                None => current.complexity,
            };
            SimFrame {
                frame_index,
                object_count: poisson(&mut rng, current.mean_objects),
                complexity,
            }
        })
        .collect();
    Ok(frames)
}

const CLASS_LABELS: [&str; 6] = [
    "car",
    "bus",
    "truck",
    "motorcycle",
    "auto-rickshaw",
    "person",
];

/// Raw detector output before post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub detections: Vec<Detection>,
    pub cpu_usage: f64,
    pub inference_time_ms: f64,
}

/// Synthetic stand-in for running `profile` on `frame`.
pub fn synth_inference<R: Rng + ?Sized>(
    frame: &SimFrame,
    profile: &ModelProfile,
    rng: &mut R,
) -> SynthOutput {
    let expected_conf = profile.base_confidence * (1.0 - 0.5 * frame.complexity);
    let mut detections = Vec::new();
    for _ in 0..frame.object_count {
        if rng.random::<f64>() >= profile.detection_recall {
            continue;
        }
        let confidence =
            (expected_conf + gaussian(rng, profile.confidence_noise_sd)).clamp(0.0, 1.0);
        let x = rng.random::<f64>();
        let y = rng.random::<f64>();
        let w = rng.random::<f64>() * (1.0 - x);
        let h = rng.random::<f64>() * (1.0 - y);
        let label = CLASS_LABELS[rng.random_range(0..CLASS_LABELS.len())];
        detections.push(Detection {
            confidence,
            class_label: label.to_string(),
            bbox: BoundingBox { x, y, w, h },
        });
    }
    let cpu_usage = (profile.base_cpu_pct
        + profile.cpu_per_object_pct * f64::from(frame.object_count)
        + gaussian(rng, 1.0))
    .clamp(0.0, 100.0);
    SynthOutput {
        detections,
        cpu_usage,
        inference_time_ms: profile.inference_time_ms * (1.0 + 0.5 * frame.complexity),
    }
}
