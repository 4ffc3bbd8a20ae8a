use std::collections::BTreeMap;
use std::process::Command;

use aruba::engine::SimStrategy;
use aruba::federated::Variant;
use aruba::harness::{parse_config, render, run_experiment, ExperimentKind, CSV_HEADER, METRICS};

const STATIC: &str = r#"
experiment = "static"
seeds = [3, 1]
repetitions = 2
[env]
dim = 2
m = 5
tasks = 12
"#;

const FAILING: &str = r#"
experiment = "dynamic"
[env]
dim = 2
tasks = 5
points = [[0.0, 0.0], [5.0, 5.0]]
"#;

#[test]
fn minimal_file_is_filled_with_defaults() {
    let config = parse_config("experiment = \"static\"\n").unwrap();
    assert_eq!(config.kind, ExperimentKind::Static);
    assert_eq!(config.name, "static");
    assert_eq!(config.seeds, vec![0]);
    assert_eq!(config.meta.unwrap().sim, SimStrategy::EpsEwoo { eps: None });
    assert!(config.env.is_some());
}

#[test]
fn negative_eps_is_reported_by_field() {
    let errors = parse_config("experiment = \"static\"\n[meta]\nsim = \"eps_ewoo\"\neps = -1\n").unwrap_err();
    assert_eq!(errors.0.len(), 1);
    assert!(errors.0[0].starts_with("meta.eps:"), "{errors}");
}

#[test]
fn every_schema_error_is_listed() {
    let text = r#"
experiment = "geometry"
colour = "red"
seeds = [1, -2]
[env]
dim = 0
noise = "loud"
[meta]
sim = "diagonal"
p = 0
v = 1
"#;
    let errors = parse_config(text).unwrap_err().0;
    for field in ["colour", "seeds[1]", "env.dim", "env.noise", "env.spread", "meta.p", "meta.v"] {
        assert!(errors.iter().any(|e| e.starts_with(field)), "{field} missing from {errors:#?}");
    }
}

#[test]
fn federated_block_with_adaptive_constants_is_valid() {
    let config = parse_config("experiment = \"federated\"\n[federated]\neps = 0.05\nzeta = 0.05\np = 1\n").unwrap();
    let fed = config.federated.unwrap();
    assert_eq!((fed.eps, fed.zeta, fed.p), (0.05, 0.05, 1.0));
    assert_eq!(fed.variant, Variant::PerCoordinate);
    assert!(parse_config("experiment = \"federated\"\n[env]\ndim = 2\n").is_err());
}

#[test]
fn rows_are_seed_major_then_time_ordered() {
    let config = parse_config(STATIC).unwrap();
    let report = render(&config, 2).unwrap();
    let mut lines = report.csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let seeds = config.run_seeds();
    assert_eq!(seeds.len(), 4);
    assert_eq!((seeds[0], seeds[2]), (3, 1));
    let keys: Vec<(usize, usize, usize)> = lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let seed = seeds.iter().position(|s| s.to_string() == f[1]).unwrap();
            (seed, f[2].parse().unwrap(), METRICS.iter().position(|m| *m == f[3]).unwrap())
        })
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(keys.len(), 4 * 12 * 8);
}

#[test]
fn summary_totals_are_csv_reductions() {
    let config = parse_config(STATIC).unwrap();
    let report = render(&config, 1).unwrap();
    let mut sums: BTreeMap<String, (u64, f64)> = BTreeMap::new();
    for line in report.csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let entry = sums.entry(f[3].to_string()).or_default();
        entry.0 += 1;
        entry.1 += f[4].parse::<f64>().unwrap();
    }
    let totals = report.summary["totals"].as_object().unwrap();
    assert_eq!(totals.len(), sums.len());
    for (metric, (count, sum)) in sums {
        assert_eq!(totals[&metric]["count"].as_u64(), Some(count));
        assert_eq!(totals[&metric]["sum"].as_f64(), Some(sum));
    }
}

#[test]
fn written_files_do_not_depend_on_worker_count() {
    let config = parse_config(STATIC).unwrap();
    let (one, many) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_experiment(&config, one.path(), 1).unwrap();
    let b = run_experiment(&config, many.path(), 3).unwrap();
    assert_eq!(std::fs::read(&a.csv_path).unwrap(), std::fs::read(&b.csv_path).unwrap());
    assert_eq!(std::fs::read(&a.summary_path).unwrap(), std::fs::read(&b.summary_path).unwrap());
}

#[test]
fn failed_runs_are_flagged_in_the_summary() {
    let config = parse_config(FAILING).unwrap();
    let report = render(&config, 1).unwrap();
    assert!(report.failed);
    assert_eq!(report.summary["status"], "failed");
    assert_eq!(report.summary["runs"][0]["partial"], true);
    assert!(report.summary["runs"][0]["error"].as_str().unwrap().contains("leaves the domain"));
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_aruba")).args(args).output().unwrap()
}

#[test]
fn exit_codes_separate_config_and_run_failures() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        path.to_str().unwrap().to_string()
    };
    let good = write("good.toml", STATIC);
    let bad = write("bad.toml", "experiment = \"static\"\n[meta]\neps = -1\n");
    let failing = write("failing.toml", FAILING);
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    assert_eq!(cli(&["validate", "--config", &good]).status.code(), Some(0));
    let rejected = cli(&["validate", "--config", &bad]);
    assert_eq!(rejected.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&rejected.stderr).contains("meta.eps"));
    assert_eq!(cli(&["run", "--config", &bad, "--out", out]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--config", &good, "--out", out, "--seed", "5", "--jobs", "2", "--quiet"]).status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let seeds: std::collections::BTreeSet<&str> = csv.lines().skip(1).filter_map(|l| l.split(',').nth(1)).collect();
    assert_eq!(seeds.len(), 2);
    assert_eq!(csv.lines().nth(1).unwrap().split(',').nth(1), Some("5"));
    assert_eq!(cli(&["run", "--config", &failing, "--out", out]).status.code(), Some(1));
}

#[test]
fn reference_static_experiment_fits_the_time_budget() {
    let config = parse_config("experiment = \"static\"\n[env]\ndim = 5\nm = 50\ntasks = 2000\n").unwrap();
    let start = std::time::Instant::now();
    let report = render(&config, 1).unwrap();
    assert!(!report.failed);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}
