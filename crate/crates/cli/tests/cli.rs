use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mlbalancer_core::knowledge::METRICS_HEADER;

fn mlbalancer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlbalancer"))
        .args(args)
        .output()
        .expect("spawn mlbalancer")
}

fn short_config(dir: &Path) -> PathBuf {
    let path = dir.join("short.toml");
    std::fs::write(
        &path,
        "[trace]\nduration_s = 120\n\n[[trace.segment]]\nstart_s = 0\nmean_objects = 3.0\ncomplexity = 0.2\n\n\
         [[trace.segment]]\nstart_s = 40\nmean_objects = 12.0\ncomplexity = 0.6\n\n\
         [[trace.segment]]\nstart_s = 80\nmean_objects = 3.0\ncomplexity = 0.2\n",
    )
    .unwrap();
    path
}

fn run_ok(config: &Path, strategy: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--strategy",
        strategy,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let output = mlbalancer(&args);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

#[test]
fn run_writes_logs_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("eg");
    let output = run_ok(&config, "epsilon-greedy", &out, &[]);
    for file in ["metrics.csv", "events.csv", "summary.txt"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with(&format!("{METRICS_HEADER}\n")));
    assert!(!metrics.contains('\r'));
    assert!(String::from_utf8_lossy(&output.stdout).contains("logs written to"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_ok(&config, "epsilon-greedy", &a, &["--seed", "11"]);
    run_ok(&config, "epsilon-greedy", &b, &["--seed", "11"]);
    for file in ["metrics.csv", "events.csv", "summary.txt"] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file} differs"
        );
    }
}

#[test]
fn zero_epsilon_never_explores() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("greedy");
    run_ok(&config, "epsilon-greedy", &out, &["--epsilon", "0"]);
    let events = std::fs::read_to_string(out.join("events.csv")).unwrap();
    assert!(events.lines().any(|l| l.contains(",exploit,")));
    assert!(!events.lines().any(|l| l.contains(",explore,")));
}

#[test]
fn several_seeds_get_their_own_directories() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let out = dir.path().join("multi");
    run_ok(&config, "naive", &out, &["--seed", "1", "--seed", "2"]);
    for seed in [1, 2] {
        assert!(out
            .join(format!("seed-{seed}"))
            .join("metrics.csv")
            .is_file());
    }
}

#[test]
fn compare_tabulates_three_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let config = short_config(dir.path());
    let mut dirs = Vec::new();
    for strategy in ["epsilon-greedy", "naive", "round-robin-boost"] {
        let out = dir.path().join(strategy);
        run_ok(&config, strategy, &out, &[]);
        dirs.push(out.to_str().unwrap().to_owned());
    }
    let report = dir.path().join("report.txt");
    let mut args = vec!["compare"];
    args.extend(dirs.iter().map(String::as_str));
    args.extend(["--out", report.to_str().unwrap()]);
    let output = mlbalancer(&args);
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let table = String::from_utf8(output.stdout).unwrap();
    assert_eq!(std::fs::read_to_string(&report).unwrap(), table);
    for name in ["epsilon-greedy", "naive", "round-robin-boost"] {
        assert!(table.contains(name), "{name} missing from\n{table}");
    }

    dirs.reverse();
    let mut args = vec!["compare"];
    args.extend(dirs.iter().map(String::as_str));
    let reversed = String::from_utf8(mlbalancer(&args).stdout).unwrap();
    let mut a: Vec<_> = table.lines().collect();
    let mut b: Vec<_> = reversed.lines().collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn unknown_strategy_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let output = mlbalancer(&[
        "run",
        "--strategy",
        "greedy",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn bad_config_value_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    std::fs::write(&config, "[planner]\nepsilon = 1.5\n").unwrap();
    let out = dir.path().join("x");
    let output = mlbalancer(&[
        "run",
        "--strategy",
        "epsilon-greedy",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!out.exists());

    let output = mlbalancer(&[
        "run",
        "--strategy",
        "naive",
        "--epsilon",
        "-0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = dir.path().join("x");
    let output = mlbalancer(&[
        "run",
        "--strategy",
        "naive",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    let output = mlbalancer(&["compare", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn missing_arguments_exit_with_one() {
    assert_eq!(mlbalancer(&["run"]).status.code(), Some(1));
    assert_eq!(mlbalancer(&["--help"]).status.code(), Some(0));
}

#[test]
fn print_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = mlbalancer(&["print-config"]);
    assert!(first.status.success());
    let path = dir.path().join("defaults.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = mlbalancer(&["print-config", "--config", path.to_str().unwrap()]);
    assert!(
        second.status.success(),
        "{}",
        String::from_utf8_lossy(&second.stderr)
    );
    assert_eq!(first.stdout, second.stdout);
}
