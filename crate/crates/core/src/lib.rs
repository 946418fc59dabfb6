//! Self-adaptive model switching for resource-constrained inference.
//!
//! The engine is a MAPE-K loop: the [`monitor`] collects per-frame metrics,
//! the [`analyzer`] turns them into per-model performance scores, the
//! [`planner`] picks the next model (epsilon-greedy or a baseline), and the
//! [`executor`] switches models and runs inference, all around a shared
//! [`knowledge`] base. [`sim`] supplies a seeded synthetic workload in place
//! of a camera and real detectors, and [`engine`] wires the stages into runs
//! whose results [`report`] summarizes.

pub mod analyzer;
pub mod config;
pub mod domain;
pub mod engine;
pub mod error;
pub mod executor;
pub mod knowledge;
pub mod monitor;
pub mod planner;
pub mod report;
pub mod sim;

pub use analyzer::{compute_score, performance_score, Analyzer, ZERO_CONFIDENCE_SCORE};
pub use config::ExperimentConfig;
pub use domain::{
    frame_confidence, BoundingBox, DecisionMode, Detection, FrameMetrics, ModelId, Score,
    SelectionDecision, SwitchEvent, WindowAggregate,
};
pub use engine::{run_experiment, run_seeds, simulate, ControlLoop, RunOutcome};
pub use error::{Error, Result};
pub use executor::{ExecutorConfig, ExecutorState};
pub use knowledge::{Knowledge, LogRegistry, ModelRepository, ScoreTable};
pub use monitor::{MetricsWindow, Monitor};
pub use planner::{
    NaiveConfig, PlannerConfig, RoundRobinBoostConfig, SelectionStrategy, StrategyKind,
};
pub use report::{compare, ComparisonReport, RunSummary};
pub use sim::{generate_trace, ModelProfile, SimFrame, TraceConfig};
