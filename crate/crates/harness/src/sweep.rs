//! Cartesian parameter sweeps with per-cell crash isolation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{ConfigError, HarnessError, Result};
use crate::report::{Headline, Report};
use crate::scenario::run;

/// Outcome of one sweep cell. Failures are kept, not propagated.
#[derive(Debug)]
pub struct CellOutcome {
    pub index: usize,
    pub assignments: Vec<(String, f64)>,
    pub result: Result<Report>,
}

impl CellOutcome {
    pub fn status(&self) -> &'static str {
        match &self.result {
            Ok(_) => "ok",
            Err(e) => e.status(),
        }
    }

    /// Headline of the report, or of the best iterate carried by the error.
    pub fn headline(&self) -> Headline {
        match &self.result {
            Ok(r) => r.payload.headline(),
            Err(HarnessError::Solve { source, .. }) => source.best().map_or_else(Headline::default, |b| Headline {
                passed: Some(false),
                value: Some(b.level),
                residual: Some(b.residual_norm),
                pohozaev_relative: None,
                iterations: Some(b.iterations),
            }),
            Err(HarnessError::Minimize { source, .. }) => source.best().map_or_else(Headline::default, |b| Headline {
                passed: Some(false),
                value: Some(b.best_value),
                residual: Some(b.grad_norm_final),
                pohozaev_relative: None,
                iterations: Some(b.iterations),
            }),
            Err(_) => Headline::default(),
        }
    }
}

/// Axis assignments of one cell and its configuration.
pub type Cell = (Vec<(String, f64)>, ExperimentConfig);

/// Expands the Cartesian product of `axes` (keys in sorted order, the last
/// axis varying fastest) into per-cell configurations, each writing into
/// `output_dir/cell-NNN`.
pub fn expand(template: &ExperimentConfig, axes: &BTreeMap<String, Vec<f64>>) -> std::result::Result<Vec<Cell>, ConfigError> {
    if axes.is_empty() || axes.values().any(|v| v.is_empty()) {
        return Err(ConfigError::EmptyAxes);
    }
    let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for (name, values) in axes {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut cell = prefix.clone();
                    cell.push((name.clone(), *v));
                    cell
                })
            })
            .collect();
    }
    cells
        .into_iter()
        .enumerate()
        .map(|(index, assignments)| {
            let mut cfg = template.clone();
            for (name, value) in &assignments {
                cfg.set_axis(name, *value)?;
            }
            cfg.output_dir = template.output_dir.join(format!("cell-{index:03}"));
            cfg.sweep.axes.clear();
            Ok((assignments, cfg))
        })
        .collect()
}

/// Runs every cell with up to `workers` threads. Configuration errors in the
/// axes abort before any cell runs; errors inside a cell become that cell's
/// outcome. Outcomes are ordered by cell index.
pub fn sweep(template: &ExperimentConfig, axes: &BTreeMap<String, Vec<f64>>, workers: usize) -> std::result::Result<Vec<CellOutcome>, ConfigError> {
    let cells = expand(template, axes)?;
    template.scenario()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ConfigError::Invalid(format!("cannot start {workers} workers: {e}")))?;
    Ok(pool.install(|| {
        cells
            .into_par_iter()
            .enumerate()
            .map(|(index, (assignments, cfg))| CellOutcome { index, assignments, result: run(&cfg) })
            .collect()
    }))
}

#[derive(Serialize)]
struct SummaryEntry<'a> {
    index: usize,
    assignments: &'a [(String, f64)],
    status: &'static str,
    headline: Headline,
    error: Option<String>,
}

/// Writes `sweep.csv` (one row per cell, plot-ready) and `sweep.json` into
/// `dir`, returning both paths.
pub fn write_summary(dir: &Path, outcomes: &[CellOutcome]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::Io { path: dir.to_path_buf(), source: e })?;
    let csv_path = dir.join("sweep.csv");
    let csv_err = |e| HarnessError::Csv { path: csv_path.clone(), source: e };
    let mut w = csv::Writer::from_path(&csv_path).map_err(csv_err)?;
    let axis_names: Vec<String> = outcomes.first().map(|o| o.assignments.iter().map(|a| a.0.clone()).collect()).unwrap_or_default();
    let mut header = vec!["index".to_string()];
    header.extend(axis_names.iter().cloned());
    header.extend(["status", "passed", "value", "residual", "pohozaev_relative", "iterations", "error"].map(String::from));
    w.write_record(&header).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    for o in outcomes {
        let h = o.headline();
        let mut rec = vec![o.index.to_string()];
        rec.extend(o.assignments.iter().map(|a| a.1.to_string()));
        rec.push(o.status().to_string());
        rec.push(h.passed.map_or_else(String::new, |b| b.to_string()));
        rec.push(opt(h.value));
        rec.push(opt(h.residual));
        rec.push(opt(h.pohozaev_relative));
        rec.push(h.iterations.map_or_else(String::new, |i| i.to_string()));
        rec.push(o.result.as_ref().err().map_or_else(String::new, |e| e.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::Io { path: csv_path.clone(), source: e })?;

    let entries: Vec<SummaryEntry> = outcomes
        .iter()
        .map(|o| SummaryEntry {
            index: o.index,
            assignments: &o.assignments,
            status: o.status(),
            headline: o.headline(),
            error: o.result.as_ref().err().map(|e| e.to_string()),
        })
        .collect();
    let json_path = dir.join("sweep.json");
    fs::write(&json_path, serde_json::to_string_pretty(&entries)?)
        .map_err(|e| HarnessError::Io { path: json_path.clone(), source: e })?;
    Ok(vec![csv_path, json_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_is_ordered_product() {
        let mut axes = BTreeMap::new();
        axes.insert("q".to_string(), vec![2.5, 3.0]);
        axes.insert("gamma".to_string(), vec![1.5, 2.0, 3.0]);
        let cells = expand(&ExperimentConfig::default(), &axes).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0].0, vec![("gamma".to_string(), 1.5), ("q".to_string(), 2.5)]);
        assert_eq!(cells[1].0, vec![("gamma".to_string(), 1.5), ("q".to_string(), 3.0)]);
        assert_eq!(cells[5].1.problem.gamma, Some(3.0));
        assert_eq!(cells[5].1.problem.q, Some(3.0));
        assert!(cells[3].1.output_dir.ends_with("cell-003"));
    }

    #[test]
    fn empty_axes_rejected() {
        let cfg = ExperimentConfig::default();
        assert!(matches!(expand(&cfg, &BTreeMap::new()), Err(ConfigError::EmptyAxes)));
        let mut axes = BTreeMap::new();
        axes.insert("q".to_string(), vec![]);
        assert!(matches!(expand(&cfg, &axes), Err(ConfigError::EmptyAxes)));
        let mut axes = BTreeMap::new();
        axes.insert("zeta".to_string(), vec![1.0]);
        assert!(matches!(expand(&cfg, &axes), Err(ConfigError::UnknownAxis(_))));
    }
}
