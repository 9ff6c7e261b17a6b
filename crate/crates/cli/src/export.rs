//! CSV and JSON artefacts.
//!
//! `metrics.csv` has one [`MetricsRow`] per line with the header
//! `method,alpha,episodes,time_mean,time_se,cvar_003,cvar_003_se,cvar_02,cvar_02_se,ev,ev_se`.
//! `returns.csv` has `episode,return,seconds` with one line per episode.
//! `run.json` holds the configuration, the metrics and an environment fingerprint.

use std::fs;
use std::path::Path;

use rabamcp_core::pg::CurvePoint;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::eval::{Evaluation, MetricsRow};

pub const METRICS_HEADER: [&str; 11] =
    ["method", "alpha", "episodes", "time_mean", "time_se", "cvar_003", "cvar_003_se", "cvar_02", "cvar_02_se", "ev", "ev_se"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ReturnRecord {
    episode: usize,
    #[serde(rename = "return")]
    ret: f64,
    seconds: f64,
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, CliError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

pub fn write_returns_csv(path: &Path, returns: &[f64], seconds: &[f64]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for (episode, (&ret, &seconds)) in returns.iter().zip(seconds).enumerate() {
        w.serialize(ReturnRecord { episode, ret, seconds })?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Returns and per-episode seconds, in episode order.
pub fn read_returns_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut recs: Vec<ReturnRecord> = r.deserialize().collect::<Result<_, _>>()?;
    recs.sort_by_key(|r| r.episode);
    Ok(recs.into_iter().map(|r| (r.ret, r.seconds)).unzip())
}

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    for p in curve {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

pub fn fingerprint() -> Value {
    let unix = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "os": std::env::consts::OS,
        "arch": std::env::consts::ARCH,
        "threads": std::thread::available_parallelism().map_or(1, |n| n.get()),
        "unix_time": unix,
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("json values serialise");
    fs::write(path, text).map_err(|e| CliError::io(path.display(), e))
}

pub fn run_json(eval: &Evaluation) -> Value {
    json!({
        "config": eval.config,
        "metrics": eval.row,
        "offline_seconds": eval.offline_seconds,
        "environment": fingerprint(),
    })
}

/// Writes `metrics.csv`, `returns.csv` and `run.json` (plus `curve.csv` when
/// training produced one) into `dir`.
pub fn write_evaluation(dir: &Path, eval: &Evaluation) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    write_metrics_csv(&dir.join("metrics.csv"), std::slice::from_ref(&eval.row))?;
    write_returns_csv(&dir.join("returns.csv"), &eval.returns, &eval.seconds)?;
    if !eval.curve.is_empty() {
        write_curve_csv(&dir.join("curve.csv"), &eval.curve)?;
    }
    write_json(&dir.join("run.json"), &run_json(eval))
}
