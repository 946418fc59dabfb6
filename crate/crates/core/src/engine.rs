//! The MAPE-K control loop and the experiment runner built on it.
//!
//! For every trace frame that is not swallowed by an in-progress model
//! switch, one loop iteration runs inference with the active model, records
//! the metrics (monitor), refreshes that model's score (analyze), and on
//! decision frames asks the strategy for the next model (plan) and enacts it
//! (execute). A switch makes the camera frames that arrive during its
//! latency window drop.

use std::path::{Path, PathBuf};

use crate::analyzer::Analyzer;
use crate::config::ExperimentConfig;
use crate::domain::{FrameMetrics, ModelId, SelectionDecision};
use crate::error::{Error, Result};
use crate::executor::{Executor, ExecutorState};
use crate::knowledge::{Knowledge, ModelRepository};
use crate::monitor::Monitor;
use crate::planner::{
    EpsilonGreedy, Naive, PlanContext, RoundRobinBoost, SelectionStrategy, StrategyKind,
};
use crate::report::RunSummary;
use crate::sim::{generate_trace, rng_for, stream, SimFrame, SimRng};

pub const METRICS_FILE: &str = "metrics.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const REPORT_FILE: &str = "report.txt";

/// What happened to one trace frame.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Dropped,
    Processed {
        metrics: FrameMetrics,
        decision: Option<SelectionDecision>,
    },
}

pub fn build_strategy(
    kind: StrategyKind,
    config: &ExperimentConfig,
    repo: &ModelRepository,
) -> Box<dyn SelectionStrategy> {
    match kind {
        StrategyKind::EpsilonGreedy => Box::new(EpsilonGreedy::new(&config.planner)),
        StrategyKind::Naive => Box::new(Naive::new(config.naive.clone())),
        StrategyKind::RoundRobinBoost => Box::new(RoundRobinBoost::new(
            config.round_robin.clone(),
            repo.ids().cloned().collect(),
        )),
    }
}

pub struct ControlLoop {
    fps: f64,
    decision_period: u64,
    knowledge: Knowledge,
    monitor: Monitor,
    analyzer: Analyzer,
    strategy: Box<dyn SelectionStrategy>,
    executor: Executor<SimRng>,
    busy_until_ms: f64,
    processed: u64,
    dropped: u64,
    decisions: u64,
}

impl ControlLoop {
    pub fn new(config: ExperimentConfig, kind: StrategyKind) -> Result<Self> {
        let (config, repo) = config.resolve()?;
        let strategy = build_strategy(kind, &config, &repo);
        Self::with_strategy(config, repo, strategy)
    }

    /// `config` must already be resolved.
    pub fn with_strategy(
        config: ExperimentConfig,
        repo: ModelRepository,
        strategy: Box<dyn SelectionStrategy>,
    ) -> Result<Self> {
        let initial = config
            .executor
            .initial_model
            .clone()
            .or_else(|| repo.ids().next().cloned())
            .ok_or(Error::EmptyRepository)?;
        let seed = config.trace.rng_seed;
        let monitor = Monitor::new(repo.ids(), config.monitor.window);
        let executor = Executor::new(
            config.executor.clone(),
            initial,
            rng_for(seed, stream::INFERENCE),
            rng_for(seed, stream::SWITCH),
        );
        Ok(Self {
            fps: f64::from(config.trace.fps),
            decision_period: u64::from(config.planner.decision_period),
            knowledge: Knowledge::new(repo, config.analyzer.initial_score),
            monitor,
            analyzer: Analyzer,
            strategy,
            executor,
            busy_until_ms: 0.0,
            processed: 0,
            dropped: 0,
            decisions: 0,
        })
    }

    pub fn arrival_ms(&self, frame_index: u64) -> f64 {
        frame_index as f64 * 1000.0 / self.fps
    }

    pub fn step(&mut self, frame: &SimFrame) -> Result<StepOutcome> {
        let now = self.arrival_ms(frame.frame_index);
        if now < self.busy_until_ms {
            self.dropped += 1;
            return Ok(StepOutcome::Dropped);
        }

        let repo = &self.knowledge.repository;
        let metrics = self.executor.process_frame(
            frame,
            repo,
            &mut self.monitor,
            &mut self.knowledge.log,
            now,
        )?;
        self.analyzer
            .refresh_scores(&metrics, &self.monitor, &mut self.knowledge.scores)?;
        self.processed += 1;

        if !self.processed.is_multiple_of(self.decision_period) {
            return Ok(StepOutcome::Processed {
                metrics,
                decision: None,
            });
        }

        let snapshot = self.knowledge.snapshot_scores();
        let active = self.executor.active().clone();
        let decision = self.strategy.decide(&PlanContext {
            frame_index: frame.frame_index,
            latest: &metrics,
            scores: &snapshot,
            monitor: &self.monitor,
            active: &active,
        })?;
        self.decisions += 1;
        self.knowledge
            .log
            .push_decision(frame.frame_index, now, decision.clone());
        if let Some(event) =
            self.executor
                .enact(&decision, &self.knowledge.repository, frame.frame_index)?
        {
            self.busy_until_ms = now + event.switch_time_ms;
            self.knowledge.log.push_switch(event, now);
        }
        Ok(StepOutcome::Processed {
            metrics,
            decision: Some(decision),
        })
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    pub fn executor_state(&self) -> &ExecutorState {
        self.executor.state()
    }

    pub fn active(&self) -> &ModelId {
        self.executor.active()
    }

    pub fn strategy(&self) -> StrategyKind {
        self.strategy.kind()
    }

    pub fn processed_frames(&self) -> u64 {
        self.processed
    }

    pub fn dropped_frames(&self) -> u64 {
        self.dropped
    }

    pub fn decision_count(&self) -> u64 {
        self.decisions
    }
}

/// A finished simulation, still in memory.
pub struct RunOutcome {
    pub strategy: StrategyKind,
    pub config: ExperimentConfig,
    pub total_frames: u64,
    pub control: ControlLoop,
}

impl RunOutcome {
    pub fn knowledge(&self) -> &Knowledge {
        self.control.knowledge()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary::from_log(
            self.strategy.as_str(),
            self.config.trace.rng_seed,
            self.total_frames,
            self.control.decision_count(),
            &self.knowledge().repository,
            &self.knowledge().log,
        )
    }

    /// Writes the metrics and events CSVs, the key-value summary and the
    /// text report into `out_dir`.
    pub fn write(&self, out_dir: &Path) -> Result<RunSummary> {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        self.knowledge()
            .export_log(&out_dir.join(METRICS_FILE), &out_dir.join(EVENTS_FILE))?;
        let summary = self.summary();
        write_text(&out_dir.join(SUMMARY_FILE), &summary.to_kv())?;
        write_text(&out_dir.join(REPORT_FILE), &summary.render())?;
        Ok(summary)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs one strategy over the whole configured trace.
pub fn simulate(config: &ExperimentConfig, strategy: StrategyKind) -> Result<RunOutcome> {
    let (config, repo) = config.clone().resolve()?;
    let trace = generate_trace(&config.trace)?;
    let mut control = ControlLoop::with_strategy(
        config.clone(),
        repo.clone(),
        build_strategy(strategy, &config, &repo),
    )?;
    for frame in &trace {
        control.step(frame)?;
    }
    Ok(RunOutcome {
        strategy,
        total_frames: trace.len() as u64,
        config,
        control,
    })
}

/// Simulates and writes all run artifacts into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    out_dir: &Path,
) -> Result<RunSummary> {
    simulate(config, strategy)?.write(out_dir)
}

/// Runs the same strategy for several seeds in parallel, one subdirectory
/// `seed-<n>` per seed.
pub fn run_seeds(
    config: &ExperimentConfig,
    strategy: StrategyKind,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<(PathBuf, RunSummary)>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let dir = out_dir.join(format!("seed-{seed}"));
                let config = config.clone().with_seed(seed);
                scope.spawn(move || run_experiment(&config, strategy, &dir).map(|s| (dir, s)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation worker panicked"))
            .collect()
    })
}
