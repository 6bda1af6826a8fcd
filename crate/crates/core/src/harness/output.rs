use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{plot, ExperimentConfig, MonteCarlo, SummaryRow, TrialFailure, TrialRecord, TrialTiming};
use crate::error::{Error, Result};
use crate::groundset::{DeploymentSet, GroundSet};

/// Files written by one call, in write order.
pub type Manifest = Vec<PathBuf>;

pub const TRIAL_COLUMNS: [&str; 18] = [
    "trial",
    "horizon",
    "active_times",
    "robots",
    "grid_p",
    "grid_q",
    "problem_size",
    "ground_size",
    "greedy_mi",
    "greedy_size",
    "optimal_mi",
    "optimal_size",
    "ratio",
    "oracle_status",
    "oracle_calls",
    "visited",
    "evaluations",
    "budget_binding",
];

const SUMMARY_COLUMNS: [&str; 6] = [
    "problem_size",
    "trials",
    "mean_greedy_mi",
    "completed",
    "mean_ratio",
    "min_ratio",
];
const TIMING_COLUMNS: [&str; 3] = ["trial", "greedy_seconds", "oracle_seconds"];
const FAILURE_COLUMNS: [&str; 2] = ["trial", "error"];

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Header row first, so an empty slice still yields a header-only file.
fn write_rows<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn write_trials(path: &Path, records: &[TrialRecord]) -> Result<()> {
    write_rows(path, &TRIAL_COLUMNS, records)
}

pub fn read_trials(path: &Path) -> Result<Vec<TrialRecord>> {
    read_rows(path)
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    write_rows(path, &SUMMARY_COLUMNS, rows)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every Monte Carlo artifact into `dir`:
/// `trials.csv`, `summary.csv`, `timings.csv`, `failures.csv`,
/// `ratio.svg`, `util.svg` and `config.echo`.
pub fn emit_outputs(mc: &MonteCarlo, cfg: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = |name: &str| dir.join(name);
    let mut manifest = Manifest::new();

    write_trials(&path("trials.csv"), &mc.records)?;
    manifest.push(path("trials.csv"));
    write_summary(&path("summary.csv"), &mc.summary)?;
    manifest.push(path("summary.csv"));
    write_rows::<TrialTiming>(&path("timings.csv"), &TIMING_COLUMNS, &mc.timings)?;
    manifest.push(path("timings.csv"));
    write_rows::<TrialFailure>(&path("failures.csv"), &FAILURE_COLUMNS, &mc.failures)?;
    manifest.push(path("failures.csv"));

    let points: Vec<(f64, f64)> = mc
        .records
        .iter()
        .filter_map(|r| r.ratio.map(|x| (r.problem_size as f64, x)))
        .collect();
    plot::plot_ratio(&path("ratio.svg"), &points, mc.bound)?;
    manifest.push(path("ratio.svg"));
    let means: Vec<(f64, f64)> = mc
        .summary
        .iter()
        .map(|s| (s.problem_size as f64, s.mean_greedy_mi))
        .collect();
    plot::plot_utility(&path("util.svg"), &means)?;
    manifest.push(path("util.svg"));

    let mut echo = cfg.clone();
    echo.output_dir = dir.to_path_buf();
    write_text(&path("config.echo"), &echo.to_toml()?)?;
    manifest.push(path("config.echo"));
    Ok(manifest)
}

/// Deployment schedule as CSV `t,r,i,x,y,cost` with 1-based indices.
pub fn write_schedule(path: &Path, ground: &GroundSet, d: &DeploymentSet) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        t: usize,
        r: usize,
        i: usize,
        x: f64,
        y: f64,
        cost: f64,
    }
    let rows: Vec<Row> = d
        .indices()
        .iter()
        .map(|&k| {
            let e = ground.get(k);
            Row {
                t: e.time + 1,
                r: e.robot + 1,
                i: e.location + 1,
                x: e.position.x,
                y: e.position.y,
                cost: e.cost,
            }
        })
        .collect();
    write_rows(path, &["t", "r", "i", "x", "y", "cost"], &rows)
}

/// `key: value` lines.
pub fn write_run_summary(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let text: String = entries.iter().map(|(k, v)| format!("{k}: {v}\n")).collect();
    write_text(path, &text)
}
