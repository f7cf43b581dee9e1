//! Grids of experiments. A grid file is an ordinary config plus a `sweep`
//! table mapping dotted keys to lists of values:
//!
//! ```text
//! source.type = gmm
//! source.n = 4096
//! sweep.beta = [0.1, 0.4, 0.7]
//! sweep.sigma = [0.05, 0.5]
//! ```
//!
//! The JSON form is `{"base": {...}, "sweep": {"beta": [...], ...}}`.
//! Points are expanded as a cartesian product and ordered by `(β, σ)`.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::harness::config::{parse_config_text, set_path, ExperimentConfig};
use crate::harness::experiment::{run_experiment_to, MetricReport, TrialMetrics, SUMMARY_CSV_HEADER};

fn flatten_axes(prefix: &str, v: &Value, out: &mut Vec<(String, Vec<Value>)>) -> Result<()> {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_axes(&key, child, out)?;
            }
            Ok(())
        }
        Value::Array(items) if !items.is_empty() => {
            out.push((prefix.to_string(), items.clone()));
            Ok(())
        }
        _ => Err(Error::Format(format!("sweep axis {prefix:?} must be a non-empty list"))),
    }
}

/// Expands a grid document into configs sorted by `(β, σ)`.
pub fn expand_grid(doc: Value) -> Result<Vec<ExperimentConfig>> {
    let Value::Object(mut root) = doc else {
        return Err(Error::Format("grid must be a table".into()));
    };
    let axes_doc = root.remove("sweep").unwrap_or(Value::Object(Map::new()));
    let base = match root.remove("base") {
        Some(b) if root.is_empty() => b,
        Some(_) => return Err(Error::Format("grid mixes `base` with top-level keys".into())),
        None => Value::Object(root),
    };
    let mut axes = Vec::new();
    flatten_axes("", &axes_doc, &mut axes)?;

    let mut points = vec![base];
    for (key, values) in &axes {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for v in values {
                let mut q = p.clone();
                set_path(&mut q, key, v.clone()).map_err(|e| Error::Format(format!("sweep.{key}: {e}")))?;
                next.push(q);
            }
        }
        points = next;
    }
    let mut cfgs = points
        .into_iter()
        .map(ExperimentConfig::from_value)
        .collect::<Result<Vec<_>>>()?;
    cfgs.sort_by(|a, b| {
        a.beta
            .partial_cmp(&b.beta)
            .unwrap_or(Ordering::Equal)
            .then(a.sigma.partial_cmp(&b.sigma).unwrap_or(Ordering::Equal))
    });
    Ok(cfgs)
}

pub fn load_grid(path: &Path) -> Result<Vec<ExperimentConfig>> {
    expand_grid(parse_config_text(&fs::read_to_string(path)?)?)
}

fn failed_report(cfg: &ExperimentConfig, msg: &str) -> MetricReport {
    MetricReport {
        label: cfg.label(),
        beta: cfg.beta,
        sigma: cfg.sigma,
        prior: cfg.prior.label().into(),
        channel: cfg.channel.label(),
        n: 0,
        m: 0,
        trials: (0..cfg.num_trials)
            .map(|t| TrialMetrics {
                trial: t,
                psnr: f64::NAN,
                ssim: f64::NAN,
                baseline_psnr: f64::NAN,
                iterations: 0,
                nfe: 0,
                termination: "error".into(),
                faults: 0,
                error: Some(msg.to_string()),
            })
            .collect(),
        wall_time_s: 0.0,
    }
}

/// Runs every point concurrently. Point `i` writes into `point_{i:03}`
/// under `out_dir`; the consolidated CSV goes to `out_dir/sweep.csv`.
pub fn sweep_to(grid: &[ExperimentConfig], out_dir: Option<&Path>) -> Result<Vec<MetricReport>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty sweep grid".into()));
    }
    let reports: Vec<MetricReport> = grid
        .par_iter()
        .enumerate()
        .map(|(i, cfg)| {
            let dir = out_dir.map(|d| d.join(format!("point_{i:03}")));
            run_experiment_to(cfg, dir.as_deref()).unwrap_or_else(|e| {
                log::warn!("sweep point {i} failed: {e}");
                failed_report(cfg, &e.to_string())
            })
        })
        .collect();
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), consolidated_csv(&reports))?;
    }
    Ok(reports)
}

pub fn sweep(grid: &[ExperimentConfig]) -> Result<Vec<MetricReport>> {
    sweep_to(grid, None)
}

pub fn consolidated_csv(reports: &[MetricReport]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for r in reports {
        out.push_str(&r.summary_row());
        out.push('\n');
    }
    out
}
