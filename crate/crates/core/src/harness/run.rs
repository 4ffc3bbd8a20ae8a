use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::engine::{run_meta_stream, transfer_risk_estimate, LedgerRow, MetaScale, RiskOptions};
use crate::environments::{gen_distributional, gen_dynamic, gen_geometry, gen_static, EnvSpec};
use crate::error::{ArubaError, Result};
use crate::federated::{run_federated, FederatedConfig};
use crate::param::ParamVector;

/// Metric names in the order they appear within one (seed, t) group.
pub const METRICS: &[&str] = &[
    "tar",
    "rub",
    "regret",
    "ub",
    "v",
    "eta_min",
    "eta_mean",
    "eta_max",
    "risk",
    "path_length",
    "payload_scalars",
];

pub const CSV_HEADER: &str = "experiment,seed,t,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub seed: u64,
    pub t: usize,
    pub metric: &'static str,
    pub value: f64,
}

/// Rows of one seeded run, plus the error that cut it short, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    pub rows: Vec<Row>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub csv: String,
    pub summary: Value,
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WrittenReport {
    pub report: Report,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

fn metric_rank(metric: &str) -> usize {
    METRICS.iter().position(|m| *m == metric).unwrap_or(METRICS.len())
}

fn ledger_rows(seed: u64, rows: &[LedgerRow], out: &mut Vec<Row>) {
    for r in rows {
        let mut push = |metric, value| out.push(Row { seed, t: r.t, metric, value });
        push("tar", r.tar);
        push("rub", r.rub);
        push("regret", r.regret);
        push("ub", r.upper_bound);
        if let Some(v) = r.v {
            push("v", v);
        }
        push("eta_min", r.eta_min);
        push("eta_mean", r.eta_mean);
        push("eta_max", r.eta_max);
    }
}

fn run_stream(config: &ExperimentConfig, seed: u64, rows: &mut Vec<Row>) -> Result<()> {
    let env = EnvSpec { seed, ..config.env.clone().expect("validated") };
    let stream = match config.kind {
        ExperimentKind::Static => gen_static(&env)?,
        ExperimentKind::Dynamic => gen_dynamic(&env)?,
        _ => gen_geometry(&env)?,
    };
    if config.kind == ExperimentKind::Dynamic {
        rows.push(Row { seed, t: 0, metric: "path_length", value: stream.path_length });
    }
    let meta = config.meta.as_ref().expect("validated").run_config(&env);
    match run_meta_stream(&meta, stream.tasks) {
        Ok(run) => {
            ledger_rows(seed, &run.rows, rows);
            Ok(())
        }
        Err(aborted) => {
            ledger_rows(seed, &aborted.rows, rows);
            Err(ArubaError::Internal(aborted.to_string()))
        }
    }
}

fn run_batch(config: &ExperimentConfig, seed: u64, rows: &mut Vec<Row>) -> Result<()> {
    let env = EnvSpec { seed, ..config.env.clone().expect("validated") };
    let batch = config.batch.as_ref().expect("validated");
    let dist = gen_distributional(&env)?;
    let meta = config.meta.as_ref().expect("validated").run_config(&env);
    let run = match run_meta_stream(&meta, dist.train_stream()?) {
        Ok(run) => run,
        Err(aborted) => {
            ledger_rows(seed, &aborted.rows, rows);
            return Err(ArubaError::Internal(aborted.to_string()));
        }
    };
    ledger_rows(seed, &run.rows, rows);
    let options = RiskOptions {
        mode: meta.mode,
        ..RiskOptions::new(batch.n_test_tasks, batch.m_test, batch.n_risk_samples)
    };
    for &checkpoint in &batch.checkpoints {
        let phi = ParamVector::mean_of(&run.phis[..checkpoint])?;
        let scale = MetaScale::average(&run.scales[..checkpoint])?;
        let risk = transfer_risk_estimate(&phi, &scale, &dist, &options)?;
        rows.push(Row { seed, t: checkpoint, metric: "risk", value: risk.mean });
    }
    Ok(())
}

fn run_fed(config: &ExperimentConfig, seed: u64, rows: &mut Vec<Row>) -> Result<()> {
    let fed = FederatedConfig { seed, ..config.federated.clone().expect("validated") };
    let run = run_federated(&fed)?;
    for r in &run.rounds {
        rows.push(Row { seed, t: r.round, metric: "eta_mean", value: r.eta_mean });
        rows.push(Row { seed, t: r.round, metric: "payload_scalars", value: (r.downlink + r.uplink) as f64 });
    }
    let last = run.rounds.last().map_or(0, |r| r.round);
    rows.push(Row { seed, t: last, metric: "risk", value: run.mean_post() });
    Ok(())
}

/// Runs one seed; rows are sorted by t, then by metric order.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> SeedRun {
    let mut rows = Vec::new();
    let outcome = match config.kind {
        ExperimentKind::Batch => run_batch(config, seed, &mut rows),
        ExperimentKind::Federated => run_fed(config, seed, &mut rows),
        _ => run_stream(config, seed, &mut rows),
    };
    rows.sort_by_key(|r| (r.t, metric_rank(r.metric)));
    SeedRun { seed, rows, error: outcome.err().map(|e| e.to_string()) }
}

/// Runs every seed on a pool of `jobs` workers and merges in seed order.
pub fn execute(config: &ExperimentConfig, jobs: usize) -> Result<Vec<SeedRun>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ArubaError::Internal(format!("worker pool: {e}")))?;
    let seeds = config.run_seeds();
    Ok(pool.install(|| seeds.par_iter().map(|&seed| run_seed(config, seed)).collect()))
}

pub fn render_csv(name: &str, runs: &[SeedRun]) -> String {
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for run in runs {
        for r in &run.rows {
            let _ = writeln!(csv, "{name},{},{},{},{}", r.seed, r.t, r.metric, r.value);
        }
    }
    csv
}

fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn render_summary(config: &ExperimentConfig, runs: &[SeedRun]) -> Value {
    let mut totals: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    let mut per_run = Vec::with_capacity(runs.len());
    for run in runs {
        let mut last: BTreeMap<&str, f64> = BTreeMap::new();
        let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
        for r in &run.rows {
            last.insert(r.metric, r.value);
            *sums.entry(r.metric).or_insert(0.0) += r.value;
            let entry = totals.entry(r.metric).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += r.value;
        }
        let mut obj = Map::new();
        obj.insert("seed".into(), json!(run.seed));
        obj.insert("status".into(), json!(if run.error.is_some() { "failed" } else { "ok" }));
        if let Some(e) = &run.error {
            obj.insert("error".into(), json!(e));
            obj.insert("partial".into(), json!(true));
        }
        obj.insert("rows".into(), json!(run.rows.len()));
        obj.insert("final".into(), Value::Object(last.into_iter().map(|(k, v)| (k.to_string(), number(v))).collect()));
        obj.insert("sums".into(), Value::Object(sums.into_iter().map(|(k, v)| (k.to_string(), number(v))).collect()));
        per_run.push(Value::Object(obj));
    }
    let failed = runs.iter().any(|r| r.error.is_some());
    json!({
        "experiment": config.name,
        "kind": config.kind.as_str(),
        "status": if failed { "failed" } else { "ok" },
        "runs": per_run,
        "totals": totals
            .into_iter()
            .map(|(k, (count, sum))| (k.to_string(), json!({ "count": count, "sum": number(sum) })))
            .collect::<Map<String, Value>>(),
    })
}

/// Runs the experiment and renders its CSV and JSON summary in memory.
pub fn render(config: &ExperimentConfig, jobs: usize) -> Result<Report> {
    let runs = execute(config, jobs)?;
    Ok(Report {
        csv: render_csv(&config.name, &runs),
        summary: render_summary(config, &runs),
        failed: runs.iter().any(|r| r.error.is_some()),
    })
}

/// Runs the experiment and writes `results.csv` and `summary.json` into
/// `out_dir`, even when a run fails part-way.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path, jobs: usize) -> Result<WrittenReport> {
    let report = render(config, jobs)?;
    std::fs::create_dir_all(out_dir).map_err(|e| ArubaError::Io(format!("{}: {e}", out_dir.display())))?;
    let csv_path = out_dir.join("results.csv");
    let summary_path = out_dir.join("summary.json");
    let write = |path: &Path, body: &str| {
        std::fs::write(path, body).map_err(|e| ArubaError::Io(format!("{}: {e}", path.display())))
    };
    write(&csv_path, &report.csv)?;
    let mut summary = serde_json::to_string_pretty(&report.summary).map_err(|e| ArubaError::Internal(e.to_string()))?;
    summary.push('\n');
    write(&summary_path, &summary)?;
    Ok(WrittenReport { report, csv_path, summary_path })
}
