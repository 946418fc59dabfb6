//! Acceptance criteria for the engine. Runs every criterion, prints one
//! PASS/FAIL line each, and exits non-zero if any failed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use mlbalancer_core::engine::{RunOutcome, EVENTS_FILE, METRICS_FILE};
use mlbalancer_core::knowledge::{read_metrics_csv, EVENTS_HEADER, METRICS_HEADER};
use mlbalancer_core::planner::{exploration_candidates, select_epsilon_greedy, EpsilonGreedy};
use mlbalancer_core::sim::{rng_for, SimRng};
use mlbalancer_core::{
    compute_score, frame_confidence, performance_score, simulate, BoundingBox, DecisionMode,
    Detection, ExperimentConfig, FrameMetrics, LogRegistry, ModelId, Monitor, PlannerConfig,
    ScoreTable, StrategyKind, WindowAggregate,
};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn id(s: &str) -> ModelId {
    ModelId::new(s).unwrap()
}

fn score_fixture() -> Check {
    let aggregate = WindowAggregate {
        model: id("efficientdet-lite2"),
        avg_confidence: 55.94,
        avg_cpu: 18.0,
        sample_count: 2,
    };
    let s = compute_score(13.0, 54.42, &aggregate).map_err(|e| e.to_string())?;
    ensure((s - -0.3627).abs() <= 5e-4, || {
        format!("score {s:.6}, expected -0.3627 +/- 5e-4")
    })?;
    Ok(format!("S = {s:.4}"))
}

fn confidence_fixture() -> Check {
    let detections: Vec<Detection> = [0.85, 0.75, 0.9]
        .into_iter()
        .map(|confidence| Detection {
            confidence,
            class_label: "car".into(),
            bbox: BoundingBox {
                x: 0.0,
                y: 0.0,
                w: 0.1,
                h: 0.1,
            },
        })
        .collect();
    let c = frame_confidence(&detections);
    ensure((c - 0.8333).abs() <= 1e-4, || format!("C_i = {c:.6}"))?;
    Ok(format!("C_i = {c:.4}"))
}

fn planner_fixture() -> Check {
    let table = ScoreTable::from_values([
        ("efficientdet-lite0", -0.25),
        ("efficientdet-lite1", -0.30),
        ("efficientdet-lite2", -0.36),
        ("ssd-mobilenet-v1", -0.28),
    ])
    .map_err(|e| e.to_string())?;
    let active = id("efficientdet-lite1");
    let mut rng = rng_for(1, 0);
    let exploit = select_epsilon_greedy(&table, &active, 0.3, 0.1, true, &mut rng)
        .map_err(|e| e.to_string())?;
    ensure(
        exploit.mode == DecisionMode::Exploit && exploit.selected == id("efficientdet-lite2"),
        || format!("p = 0.3 gave {:?} {}", exploit.mode, exploit.selected),
    )?;
    let candidates = exploration_candidates(&table, true);
    ensure(
        !candidates.contains(&id("efficientdet-lite2")) && candidates.len() == 3,
        || format!("exploration candidates {candidates:?}"),
    )?;
    for _ in 0..1000 {
        let explore = select_epsilon_greedy(&table, &active, 0.08, 0.1, true, &mut rng)
            .map_err(|e| e.to_string())?;
        ensure(explore.mode == DecisionMode::Explore, || {
            "p = 0.08 did not explore".into()
        })?;
        ensure(candidates.contains(&explore.selected), || {
            format!("explored to {}", explore.selected)
        })?;
    }
    Ok("p=0.3 -> exploit efficientdet-lite2; p=0.08 -> explore over {lite0, lite1, ssd}".into())
}

fn exploration_rate() -> Check {
    let start = Instant::now();
    let table = ScoreTable::from_values([("a", -0.25), ("b", -0.30), ("c", -0.36), ("d", -0.28)])
        .map_err(|e| e.to_string())?;
    let mut planner = EpsilonGreedy::new(&PlannerConfig::default());
    let active = id("c");
    let mut explores = 0u32;
    for _ in 0..100_000 {
        if planner
            .select(&table, &active)
            .map_err(|e| e.to_string())?
            .mode
            == DecisionMode::Explore
        {
            explores += 1;
        }
    }
    let elapsed = start.elapsed();
    let rate = f64::from(explores) / 100_000.0;
    ensure((0.097..=0.103).contains(&rate), || {
        format!("explore rate {rate}")
    })?;
    ensure(elapsed < Duration::from_secs(5), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!("explore rate {rate:.4} in {elapsed:.2?}"))
}

fn starvation_freedom(eg: &RunOutcome, elapsed: Duration) -> Check {
    ensure(eg.total_frames == 108_000, || {
        format!("{} frames", eg.total_frames)
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("run took {elapsed:?}")
    })?;
    let log = &eg.knowledge().log;
    let decisions = log.decisions().count() as f64;
    let mut counts: BTreeMap<&ModelId, u64> =
        eg.knowledge().repository.ids().map(|m| (m, 0)).collect();
    for d in log.decisions() {
        *counts.get_mut(&d.selected).unwrap() += 1;
    }
    let models = counts.len() as f64;
    let floor = 0.5 * eg.config.planner.epsilon / (models - 1.0) * decisions;
    for (model, count) in &counts {
        ensure(*count as f64 >= floor, || {
            format!("{model} selected {count} times, floor {floor:.1}")
        })?;
    }
    let least = counts.values().min().unwrap();
    Ok(format!(
        "{decisions} decisions, least-selected model {least} >= {floor:.1}, run {elapsed:.2?}"
    ))
}

fn fairness_ordering(eg: &RunOutcome, naive: &RunOutcome, rr: &RunOutcome) -> Check {
    let (e, n, r) = (
        eg.summary().max_share(),
        naive.summary().max_share(),
        rr.summary().max_share(),
    );
    ensure(e < n && e < r, || {
        format!("max-share eg {e:.4}, naive {n:.4}, rr {r:.4}")
    })?;
    ensure(n > 0.6 && r > 0.6, || {
        format!("naive {n:.4}, rr {r:.4} not above 0.6")
    })?;
    ensure(e < 0.6, || format!("eg {e:.4} not below 0.6"))?;
    Ok(format!("max-share eg {e:.4} < naive {n:.4}, rr {r:.4}"))
}

fn switch_time_ordering(eg: &RunOutcome, naive: &RunOutcome, rr: &RunOutcome) -> Check {
    let (e, n, r) = (
        eg.summary().avg_switch_time_s,
        naive.summary().avg_switch_time_s,
        rr.summary().avg_switch_time_s,
    );
    ensure(n < e && e < r, || {
        format!("naive {n:.4} s, eg {e:.4} s, rr {r:.4} s")
    })?;
    Ok(format!("naive {n:.4} s < eg {e:.4} s < rr {r:.4} s"))
}

fn monitor_oracle() -> Check {
    let names = [id("a"), id("b"), id("c")];
    let mut rng: SimRng = rng_for(42, 9);
    let mut checks = 0u64;
    for _ in 0..1000 {
        let capacity = rng.random_range(1..40usize);
        let length = rng.random_range(0..120usize);
        let mut monitor = Monitor::new(&names, capacity);
        let mut log = LogRegistry::default();
        let mut history: Vec<FrameMetrics> = Vec::new();
        for frame_index in 0..length as u64 {
            let metrics = FrameMetrics {
                frame_index,
                model: names[rng.random_range(0..names.len())].clone(),
                confidence_score: rng.random::<f64>(),
                cpu_usage: rng.random::<f64>() * 100.0,
                detection_count: rng.random_range(0..10),
                inference_time_ms: 10.0,
            };
            history.push(metrics.clone());
            monitor
                .record(metrics, 0.0, &mut log)
                .map_err(|e| e.to_string())?;
        }
        for name in &names {
            let own: Vec<&FrameMetrics> = history.iter().filter(|m| &m.model == name).collect();
            let kept = &own[own.len().saturating_sub(capacity)..];
            let got = monitor.aggregate(name).map_err(|e| e.to_string())?;
            match got {
                None => ensure(kept.is_empty(), || format!("{name}: missing aggregate"))?,
                Some(agg) => {
                    let n = kept.len() as f64;
                    let mut conf = 0.0;
                    let mut cpu = 0.0;
                    for m in kept {
                        conf += m.confidence_score;
                        cpu += m.cpu_usage;
                    }
                    ensure(agg.sample_count == kept.len(), || {
                        format!("{name}: sample count")
                    })?;
                    ensure((agg.avg_confidence - conf / n).abs() <= 1e-9, || {
                        format!("{name}: C_avg")
                    })?;
                    ensure((agg.avg_cpu - cpu / n).abs() <= 1e-9, || {
                        format!("{name}: U_avg")
                    })?;
                }
            }
            checks += 1;
        }
    }
    Ok(format!(
        "1000 sequences, {checks} aggregates match brute force"
    ))
}

fn determinism(first: &RunOutcome, dir: &Path) -> Check {
    let second = simulate(&first.config, first.strategy).map_err(|e| e.to_string())?;
    let (a, b) = (dir.join("first"), dir.join("second"));
    first.write(&a).map_err(|e| e.to_string())?;
    second.write(&b).map_err(|e| e.to_string())?;
    for file in [METRICS_FILE, EVENTS_FILE] {
        let x = std::fs::read(a.join(file)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.join(file)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{file} differs between runs"))?;
    }
    Ok("metrics.csv and events.csv byte-identical across two runs".into())
}

fn csv_contract(run: &RunOutcome, dir: &Path) -> Check {
    let out = dir.join("contract");
    run.write(&out).map_err(|e| e.to_string())?;
    let metrics_text =
        std::fs::read_to_string(out.join(METRICS_FILE)).map_err(|e| e.to_string())?;
    let events_text = std::fs::read_to_string(out.join(EVENTS_FILE)).map_err(|e| e.to_string())?;
    ensure(metrics_text.lines().next() == Some(METRICS_HEADER), || {
        "metrics header".into()
    })?;
    ensure(events_text.lines().next() == Some(EVENTS_HEADER), || {
        "events header".into()
    })?;
    ensure(
        METRICS_HEADER
            == "frame_index,sim_time_ms,model_id,cpu_usage_pct,confidence,detection_count,inference_time_ms,battery_mah"
            && EVENTS_HEADER == "frame_index,event_type,mode,random_draw,from_model,to_model,switch_time_ms",
        || "header constants drifted".into(),
    )?;
    ensure(
        !metrics_text.contains('\r') && !events_text.contains('\r'),
        || "CR in output".into(),
    )?;
    let parsed = read_metrics_csv(&out.join(METRICS_FILE)).map_err(|e| e.to_string())?;
    let original: Vec<&FrameMetrics> = run.knowledge().log.frames().collect();
    ensure(parsed.len() == original.len(), || {
        format!("{} rows vs {} frames", parsed.len(), original.len())
    })?;
    let tol = 5e-5 + 1e-9;
    for (row, m) in parsed.iter().zip(&original) {
        let p = &row.metrics;
        ensure(
            p.frame_index == m.frame_index
                && p.model == m.model
                && p.detection_count == m.detection_count
                && (p.cpu_usage - m.cpu_usage).abs() <= tol
                && (p.confidence_score - m.confidence_score).abs() <= tol
                && (p.inference_time_ms - m.inference_time_ms).abs() <= tol,
            || format!("frame {} does not round-trip", m.frame_index),
        )?;
    }
    Ok(format!(
        "headers exact, {} frames round-trip at 4 dp",
        parsed.len()
    ))
}

fn sign_law() -> Check {
    let mut rng: SimRng = rng_for(7, 11);
    for _ in 0..10_000 {
        let u_i = 0.01 + rng.random::<f64>() * 99.99;
        let u_avg = 0.01 + rng.random::<f64>() * 99.99;
        let c_i = 0.001 + rng.random::<f64>() * 0.999;
        // A share of exact ties exercises the zero branch.
        let c_avg = if rng.random::<f64>() < 0.1 {
            c_i
        } else {
            rng.random::<f64>()
        };
        let s = performance_score(u_i, c_i, u_avg, c_avg).map_err(|e| e.to_string())?;
        let expected = c_i.partial_cmp(&c_avg).unwrap();
        let got = s.partial_cmp(&0.0).unwrap();
        ensure(got == expected, || {
            format!("U_i={u_i} C_i={c_i} U_avg={u_avg} C_avg={c_avg}: score {s}")
        })?;
    }
    Ok("10000 samples: sign(S) == sign(C_i - C_avg)".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let config = ExperimentConfig::default();

    let start = Instant::now();
    let eg = simulate(&config, StrategyKind::EpsilonGreedy).expect("epsilon-greedy run");
    let eg_elapsed = start.elapsed();
    let naive = simulate(&config, StrategyKind::Naive).expect("naive run");
    let rr = simulate(&config, StrategyKind::RoundRobinBoost).expect("round-robin run");

    let results: Vec<(&str, Check)> = vec![
        ("score-formula fixture", score_fixture()),
        ("confidence fixture", confidence_fixture()),
        ("planner fixture", planner_fixture()),
        ("exploration rate", exploration_rate()),
        ("starvation freedom", starvation_freedom(&eg, eg_elapsed)),
        ("fairness ordering", fairness_ordering(&eg, &naive, &rr)),
        (
            "switch-time ordering",
            switch_time_ordering(&eg, &naive, &rr),
        ),
        ("monitor oracle", monitor_oracle()),
        ("determinism", determinism(&eg, dir.path())),
        ("CSV contract", csv_contract(&naive, dir.path())),
        ("sign law", sign_law()),
    ];

    let mut failed = 0;
    for (i, (name, result)) in results.iter().enumerate() {
        match result {
            Ok(detail) => println!("[PASS] {:>2}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {:>2}. {name}: {why}", i + 1);
            }
        }
    }
    println!(
        "\nacceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
