//! Experiment configuration, read from a TOML file.
//!
//! Every section is optional and falls back to the defaults used by the
//! experiment suite:
//!
//! ```toml
//! [trace]
//! fps = 60
//! duration_s = 1800
//! rng_seed = 2024
//!
//! [[trace.segment]]
//! start_s = 0.0
//! mean_objects = 3.0
//! complexity = 0.2
//!
//! [monitor]
//! window = 30
//!
//! [analyzer]
//! initial_score = 0.0
//!
//! [planner]
//! epsilon = 0.1
//! decision_period = 1
//! rng_seed = 2024
//! explore_excludes_best = true
//!
//! [naive]
//! cpu_high_threshold = 20.0
//! confidence_low_threshold = 0.4
//! model_order = ["ssd-mobilenet-v1", "efficientdet-lite0", "efficientdet-lite1", "efficientdet-lite2"]
//!
//! [round_robin]
//! time_slice_frames = 60
//! boost_period_frames = 600
//! rank_weight_base = 3
//!
//! [executor]
//! confidence_floor = 0.25
//! switch_jitter = 0.1
//! initial_model = "ssd-mobilenet-v1"
//!
//! [[model]]
//! id = "ssd-mobilenet-v1"
//! base_cpu_pct = 14.0
//! cpu_per_object_pct = 0.25
//! base_confidence = 0.45
//! confidence_noise_sd = 0.04
//! detection_recall = 0.85
//! switch_latency_ms = 300.0
//! inference_time_ms = 28.0
//! ```
//!
//! Giving any `[[model]]` replaces the whole default model family.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::DEFAULT_INITIAL_SCORE;
use crate::error::{Error, Result};
use crate::executor::ExecutorConfig;
use crate::knowledge::ModelRepository;
use crate::monitor::DEFAULT_WINDOW;
use crate::planner::{NaiveConfig, PlannerConfig, RoundRobinBoostConfig};
use crate::sim::{default_profiles, ModelProfile, TraceConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonitorConfig {
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerConfig {
    #[serde(default)]
    pub initial_score: f64,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        Self {
            initial_score: DEFAULT_INITIAL_SCORE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub monitor: MonitorConfig,
    #[serde(default)]
    pub analyzer: AnalyzerConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub naive: NaiveConfig,
    #[serde(default)]
    pub round_robin: RoundRobinBoostConfig,
    #[serde(default)]
    pub executor: ExecutorConfig,
    #[serde(default = "default_profiles", rename = "model")]
    pub models: Vec<ModelProfile>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            trace: TraceConfig::default(),
            monitor: MonitorConfig::default(),
            analyzer: AnalyzerConfig::default(),
            planner: PlannerConfig::default(),
            naive: NaiveConfig::default(),
            round_robin: RoundRobinBoostConfig::default(),
            executor: ExecutorConfig::default(),
            models: default_profiles(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// One seed drives both the workload and the planner.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.trace.rng_seed = seed;
        self.planner.rng_seed = seed;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.planner.epsilon = epsilon;
        self
    }

    pub fn repository(&self) -> Result<ModelRepository> {
        for profile in &self.models {
            profile.validate()?;
        }
        ModelRepository::new(self.models.clone())
    }

    /// Validates every section and fills in defaults that depend on the
    /// model family.
    pub fn resolve(mut self) -> Result<(Self, ModelRepository)> {
        self.trace.validate()?;
        let repo = self.repository()?;
        if self.monitor.window == 0 {
            return Err(Error::Config("monitor window must be at least 1".into()));
        }
        if !self.analyzer.initial_score.is_finite() {
            return Err(Error::Config(
                "analyzer initial_score must be finite".into(),
            ));
        }
        self.planner.validate()?;
        self.naive.resolve(&repo)?;
        self.round_robin.validate()?;
        self.executor.validate()?;
        match &self.executor.initial_model {
            Some(id) if !repo.contains(id) => {
                return Err(Error::Config(format!(
                    "initial_model {id} is not a registered model"
                )))
            }
            Some(_) => {}
            None => self.executor.initial_model = repo.ids().next().cloned(),
        }
        Ok((self, repo))
    }
}
