use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::aggregate::{Aggregate, Stat};
use crate::error::Result;
use crate::marl::CurvePoint;

/// Renders every `fig*.csv` next to it as a PNG line plot.
pub const PLOT_SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plot the tidy CSV files (x, series, mean, std) in this directory."""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

LABELS = {
    "fig4_training_curve": ("episode", "mean reward"),
    "fig5_rate": ("", "mean uplink rate (bit/s)"),
    "fig6_delay": ("", "mean total delay (s)"),
}


def load(path):
    series = {}
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            xs, ms, ss = series.setdefault(row["series"], ([], [], []))
            xs.append(float(row["x"]))
            ms.append(float(row["mean"]))
            ss.append(float(row["std"]))
    return series


def main(directory):
    for path in sorted(glob.glob(os.path.join(directory, "fig*.csv"))):
        name = os.path.splitext(os.path.basename(path))[0]
        key = next((k for k in LABELS if name.startswith(k)), None)
        xlabel, ylabel = LABELS.get(key, ("x", "value"))
        if not xlabel:
            xlabel = name.split("_vs_")[-1]
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for label, (xs, ms, ss) in sorted(load(path).items()):
            lo = [m - s for m, s in zip(ms, ss)]
            hi = [m + s for m, s in zip(ms, ss)]
            ax.plot(xs, ms, marker="o" if len(xs) < 30 else None, label=label)
            ax.fill_between(xs, lo, hi, alpha=0.2)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        ax.legend()
        fig.tight_layout()
        fig.savefig(os.path.join(directory, name + ".png"), dpi=150)
        plt.close(fig)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__)))
"#;

/// One row of a plot-data CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub series: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PlotReport {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

fn find_aggregates(dir: &Path) -> Vec<PathBuf> {
    let mut found: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.file_name() == "aggregate.json")
        .map(|e| e.into_path())
        .collect();
    found.sort();
    found
}

fn read_curve(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

fn write_rows(path: &Path, rows: &mut [PlotRow]) -> Result<()> {
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    let mut w = csv::Writer::from_path(path)?;
    for r in rows.iter() {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and standard deviation over seeds of the per-episode training reward.
fn curve_rows(root: &Path, agg: &Aggregate, warnings: &mut Vec<String>) -> Result<Vec<PlotRow>> {
    let runs = root.join("runs").join("base");
    let mut curves = Vec::new();
    for seed in &agg.seeds {
        let path = runs.join(format!("seed_{seed}")).join("training_curve.csv");
        if path.is_file() {
            curves.push(read_curve(&path)?);
        } else {
            warnings.push(format!("missing training curve {}", path.display()));
        }
    }
    let episodes = curves.iter().map(Vec::len).min().unwrap_or(0);
    Ok((0..episodes)
        .filter_map(|e| {
            let xs: Vec<f64> = curves.iter().map(|c| c[e].mean_reward).collect();
            Stat::from_samples(&xs).map(|s| PlotRow {
                x: e as f64,
                series: agg.series.clone(),
                mean: s.mean,
                std: s.std,
            })
        })
        .collect())
}

/// Collect every `aggregate.json` under `dir` and write tidy plot-data
/// CSVs plus `plot.py` into `dir`. Missing inputs produce warnings, not
/// errors.
pub fn emit_plots(dir: &Path) -> Result<PlotReport> {
    let mut report = PlotReport::default();
    let aggregates = if dir.is_dir() { find_aggregates(dir) } else { Vec::new() };
    if aggregates.is_empty() {
        let msg = format!("no aggregate.json found under {}", dir.display());
        log::warn!("{msg}");
        report.warnings.push(msg);
        return Ok(report);
    }
    let mut figures: BTreeMap<String, Vec<PlotRow>> = BTreeMap::new();
    for path in &aggregates {
        let agg: Aggregate = serde_json::from_str(&fs::read_to_string(path)?)?;
        let root = path.parent().unwrap_or(dir);
        match &agg.axis {
            Some(axis) => {
                for (fig, metric) in [("fig5_rate", "mean_rate"), ("fig6_delay", "mean_delay")] {
                    let rows = figures.entry(format!("{fig}_vs_{axis}")).or_default();
                    for p in &agg.points {
                        match (p.x, p.metrics.get(metric)) {
                            (Some(x), Some(s)) => rows.push(PlotRow {
                                x,
                                series: agg.series.clone(),
                                mean: s.mean,
                                std: s.std,
                            }),
                            _ => report.warnings.push(format!("{}: {} has no {metric}", path.display(), p.label)),
                        }
                    }
                }
            }
            None if agg.mode.is_trained() => {
                let rows = curve_rows(root, &agg, &mut report.warnings)?;
                figures.entry("fig4_training_curve".into()).or_default().extend(rows);
            }
            None => {}
        }
    }
    for (name, mut rows) in figures {
        if rows.is_empty() {
            continue;
        }
        let file = dir.join(format!("{name}.csv"));
        write_rows(&file, &mut rows)?;
        report.files.push(file);
    }
    if !report.files.is_empty() {
        let script = dir.join("plot.py");
        fs::write(&script, PLOT_SCRIPT)?;
        report.files.push(script);
    }
    for w in &report.warnings {
        log::warn!("{w}");
    }
    Ok(report)
}
