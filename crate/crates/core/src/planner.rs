//! Model selection: epsilon-greedy over the score table, plus the two
//! baseline policies (threshold stepping and prioritized round robin).

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{DecisionMode, FrameMetrics, ModelId, SelectionDecision};
use crate::error::{Error, Result};
use crate::knowledge::{ModelRepository, ScoreTable};
use crate::monitor::Monitor;
use crate::sim::{rng_for, stream, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Processed frames between two selection decisions.
    #[serde(default = "one")]
    pub decision_period: u32,
    #[serde(default = "default_planner_seed")]
    pub rng_seed: u64,
    /// Leave the current best model out of the exploration draw.
    #[serde(default = "yes")]
    pub explore_excludes_best: bool,
}

fn default_epsilon() -> f64 {
    0.1
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

fn default_planner_seed() -> u64 {
    crate::sim::DEFAULT_SEED
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            decision_period: 1,
            rng_seed: default_planner_seed(),
            explore_excludes_best: true,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon {} outside [0, 1]",
                self.epsilon
            )));
        }
        if self.decision_period == 0 {
            return Err(Error::Config("decision_period must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NaiveConfig {
    #[serde(default = "default_cpu_high")]
    pub cpu_high_threshold: f64,
    #[serde(default = "default_confidence_low")]
    pub confidence_low_threshold: f64,
    /// Lightest model first. Empty means repository declaration order.
    #[serde(default)]
    pub model_order: Vec<ModelId>,
}

fn default_cpu_high() -> f64 {
    20.0
}

fn default_confidence_low() -> f64 {
    0.4
}

impl Default for NaiveConfig {
    fn default() -> Self {
        Self {
            cpu_high_threshold: default_cpu_high(),
            confidence_low_threshold: default_confidence_low(),
            model_order: Vec::new(),
        }
    }
}

impl NaiveConfig {
    /// Fills an empty order from the repository and checks that the order is
    /// a permutation of it.
    pub fn resolve(&mut self, repo: &ModelRepository) -> Result<()> {
        if !(0.0..=100.0).contains(&self.cpu_high_threshold) {
            return Err(Error::Config(format!(
                "cpu_high_threshold {} outside [0, 100]",
                self.cpu_high_threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence_low_threshold) {
            return Err(Error::Config(format!(
                "confidence_low_threshold {} outside [0, 1]",
                self.confidence_low_threshold
            )));
        }
        if self.model_order.is_empty() {
            self.model_order = repo.ids().cloned().collect();
        }
        check_permutation(&self.model_order, repo, "naive model_order")
    }
}

fn check_permutation(order: &[ModelId], repo: &ModelRepository, what: &str) -> Result<()> {
    let mut sorted: Vec<&ModelId> = order.iter().collect();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != order.len()
        || order.len() != repo.len()
        || !order.iter().all(|m| repo.contains(m))
    {
        return Err(Error::Config(format!(
            "{what} must list every model exactly once"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRobinBoostConfig {
    #[serde(default = "default_slice")]
    pub time_slice_frames: u64,
    #[serde(default = "default_boost")]
    pub boost_period_frames: u64,
    /// The model at CPU rank `r` (0 = lightest) of `k` models runs for
    /// `time_slice_frames * rank_weight_base^(k - 1 - r)` frames per cycle.
    /// A base of 1 gives plain round robin.
    #[serde(default = "default_weight_base")]
    pub rank_weight_base: u32,
}

fn default_slice() -> u64 {
    60
}

fn default_boost() -> u64 {
    600
}

fn default_weight_base() -> u32 {
    3
}

impl Default for RoundRobinBoostConfig {
    fn default() -> Self {
        Self {
            time_slice_frames: default_slice(),
            boost_period_frames: default_boost(),
            rank_weight_base: default_weight_base(),
        }
    }
}

impl RoundRobinBoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_slice_frames == 0
            || self.boost_period_frames == 0
            || self.rank_weight_base == 0
        {
            return Err(Error::Config(
                "round robin time_slice_frames, boost_period_frames and rank_weight_base must be at least 1"
                    .into(),
            ));
        }
        Ok(())
    }

    /// Slice length, in frames, for the model at `rank` out of `models`.
    pub fn slice_len(&self, rank: usize, models: usize) -> u64 {
        let exponent = (models - 1 - rank) as u32;
        u64::from(self.rank_weight_base)
            .saturating_pow(exponent)
            .saturating_mul(self.time_slice_frames)
    }
}

/// Models that exploration may draw from.
pub fn exploration_candidates(table: &ScoreTable, exclude_best: bool) -> Vec<ModelId> {
    let best = if exclude_best { table.best() } else { None };
    table
        .iter()
        .map(|s| &s.model)
        .filter(|m| Some(*m) != best)
        .cloned()
        .collect()
}

/// One epsilon-greedy decision for a given draw `p`. `rng` is only used to
/// pick among exploration candidates.
pub fn select_epsilon_greedy<R: Rng + ?Sized>(
    table: &ScoreTable,
    active: &ModelId,
    p: f64,
    epsilon: f64,
    exclude_best: bool,
    rng: &mut R,
) -> Result<SelectionDecision> {
    let best = table.best().ok_or(Error::EmptyRepository)?.clone();
    let decision = |selected, mode| SelectionDecision {
        selected,
        mode,
        random_draw: Some(p),
        previous: active.clone(),
    };
    if p <= epsilon {
        let candidates = exploration_candidates(table, exclude_best);
        if !candidates.is_empty() {
            let pick = candidates[rng.random_range(0..candidates.len())].clone();
            return Ok(decision(pick, DecisionMode::Explore));
        }
    }
    Ok(decision(best, DecisionMode::Exploit))
}

/// Threshold stepping: too much CPU moves one model lighter, too little
/// confidence one model heavier, otherwise stay.
pub fn select_naive(
    latest: &FrameMetrics,
    config: &NaiveConfig,
    active: &ModelId,
) -> SelectionDecision {
    let order = &config.model_order;
    let selected = match order.iter().position(|m| m == active) {
        None => active.clone(),
        Some(pos) => {
            let next = if latest.cpu_usage > config.cpu_high_threshold {
                pos.saturating_sub(1)
            } else if latest.confidence_score < config.confidence_low_threshold {
                (pos + 1).min(order.len() - 1)
            } else {
                pos
            };
            order[next].clone()
        }
    };
    SelectionDecision {
        selected,
        mode: DecisionMode::Forced,
        random_draw: None,
        previous: active.clone(),
    }
}

/// Which model owns `frame_index` when the cycle walks `cpu_rank` in order,
/// giving each model its rank-weighted slice.
pub fn select_round_robin_boost(
    frame_index: u64,
    config: &RoundRobinBoostConfig,
    cpu_rank: &[ModelId],
    active: &ModelId,
) -> SelectionDecision {
    let forced = |selected: ModelId| SelectionDecision {
        selected,
        mode: DecisionMode::Forced,
        random_draw: None,
        previous: active.clone(),
    };
    if cpu_rank.is_empty() {
        return forced(active.clone());
    }
    let k = cpu_rank.len();
    let cycle: u64 = (0..k)
        .map(|r| config.slice_len(r, k))
        .fold(0, u64::saturating_add);
    let mut offset = frame_index % cycle;
    for (rank, model) in cpu_rank.iter().enumerate() {
        let len = config.slice_len(rank, k);
        if offset < len {
            return forced(model.clone());
        }
        offset -= len;
    }
    forced(cpu_rank[k - 1].clone())
}

/// Reorders `current` by each model's windowed average CPU, lightest first.
/// Models without data go last; ties keep their current relative order.
pub fn rank_by_cpu(current: &[ModelId], monitor: &Monitor) -> Result<Vec<ModelId>> {
    let mut keyed = Vec::with_capacity(current.len());
    for model in current {
        let cpu = monitor.aggregate(model)?.map(|a| a.avg_cpu);
        keyed.push((cpu, model.clone()));
    }
    keyed.sort_by(|(a, _), (b, _)| match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(keyed.into_iter().map(|(_, m)| m).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    EpsilonGreedy,
    Naive,
    RoundRobinBoost,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::EpsilonGreedy,
        StrategyKind::Naive,
        StrategyKind::RoundRobinBoost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::EpsilonGreedy => "epsilon-greedy",
            StrategyKind::Naive => "naive",
            StrategyKind::RoundRobinBoost => "round-robin-boost",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// What a strategy may look at when deciding.
pub struct PlanContext<'a> {
    pub frame_index: u64,
    pub latest: &'a FrameMetrics,
    pub scores: &'a ScoreTable,
    pub monitor: &'a Monitor,
    pub active: &'a ModelId,
}

pub trait SelectionStrategy {
    fn kind(&self) -> StrategyKind;

    fn decide(&mut self, ctx: &PlanContext<'_>) -> Result<SelectionDecision>;
}

#[derive(Debug, Clone)]
pub struct EpsilonGreedy {
    epsilon: f64,
    exclude_best: bool,
    rng: SimRng,
}

impl EpsilonGreedy {
    pub fn new(config: &PlannerConfig) -> Self {
        Self {
            epsilon: config.epsilon,
            exclude_best: config.explore_excludes_best,
            rng: rng_for(config.rng_seed, stream::PLANNER),
        }
    }

    pub fn select(&mut self, table: &ScoreTable, active: &ModelId) -> Result<SelectionDecision> {
        let p = self.rng.random::<f64>();
        select_epsilon_greedy(
            table,
            active,
            p,
            self.epsilon,
            self.exclude_best,
            &mut self.rng,
        )
    }
}

impl SelectionStrategy for EpsilonGreedy {
    fn kind(&self) -> StrategyKind {
        StrategyKind::EpsilonGreedy
    }

    fn decide(&mut self, ctx: &PlanContext<'_>) -> Result<SelectionDecision> {
        self.select(ctx.scores, ctx.active)
    }
}

#[derive(Debug, Clone)]
pub struct Naive {
    config: NaiveConfig,
}

impl Naive {
    pub fn new(config: NaiveConfig) -> Self {
        Self { config }
    }
}

impl SelectionStrategy for Naive {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Naive
    }

    fn decide(&mut self, ctx: &PlanContext<'_>) -> Result<SelectionDecision> {
        Ok(select_naive(ctx.latest, &self.config, ctx.active))
    }
}

/// Round robin over a CPU ranking that is recomputed every boost period.
#[derive(Debug, Clone)]
pub struct RoundRobinBoost {
    config: RoundRobinBoostConfig,
    rank: Vec<ModelId>,
    next_boost: u64,
}

impl RoundRobinBoost {
    pub fn new(config: RoundRobinBoostConfig, initial_rank: Vec<ModelId>) -> Self {
        let next_boost = config.boost_period_frames;
        Self {
            config,
            rank: initial_rank,
            next_boost,
        }
    }

    pub fn rank(&self) -> &[ModelId] {
        &self.rank
    }
}

impl SelectionStrategy for RoundRobinBoost {
    fn kind(&self) -> StrategyKind {
        StrategyKind::RoundRobinBoost
    }

    fn decide(&mut self, ctx: &PlanContext<'_>) -> Result<SelectionDecision> {
        if ctx.frame_index >= self.next_boost {
            self.rank = rank_by_cpu(&self.rank, ctx.monitor)?;
            let period = self.config.boost_period_frames;
            self.next_boost = (ctx.frame_index / period + 1) * period;
        }
        Ok(select_round_robin_boost(
            ctx.frame_index,
            &self.config,
            &self.rank,
            ctx.active,
        ))
    }
}
