use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RunMode;
use crate::env::ConstraintAudit;
use crate::marl::Summary;

/// Version of the metrics CSV and JSON layouts.
pub const SCHEMA_VERSION: u32 = 1;

/// Episodes at the end of training averaged into the final training scores.
pub const FINAL_WINDOW: usize = 50;

/// Mean, sample standard deviation, and 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub ci95: f64,
}

impl Stat {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Some(Self { n, mean, std: 0.0, ci95: 0.0 });
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("degrees of freedom").inverse_cdf(0.975);
        Some(Self {
            n,
            mean,
            std,
            ci95: t * std / (n as f64).sqrt(),
        })
    }
}

/// Contents of a run's `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub mode: RunMode,
    pub seed: u64,
    pub x: Option<f64>,
    pub summary: Summary,
    pub audit: ConstraintAudit,
    /// Means over the last training episodes, for trained modes.
    pub final_train_reward: Option<f64>,
    pub final_train_delay: Option<f64>,
}

impl RunSummary {
    /// Named scalar metrics that enter the aggregate.
    pub fn metrics(&self) -> Vec<(&'static str, Option<f64>)> {
        let s = &self.summary;
        vec![
            ("mean_rate", s.mean_rate),
            ("mean_sinr", s.mean_sinr),
            ("mean_delay", Some(s.mean_delay)),
            ("mean_local", Some(s.mean_local)),
            ("mean_access", Some(s.mean_access)),
            ("mean_fronthaul", Some(s.mean_fronthaul)),
            ("mean_edge", Some(s.mean_edge)),
            ("drop_rate", Some(s.drop_rate)),
            ("mean_reward", Some(s.mean_reward)),
            ("offload_fraction", Some(s.offload_fraction)),
            ("final_train_reward", self.final_train_reward),
            ("final_train_delay", self.final_train_delay),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAggregate {
    pub x: Option<f64>,
    pub label: String,
    pub runs: usize,
    pub metrics: BTreeMap<String, Stat>,
    pub audit: ConstraintAudit,
}

impl PointAggregate {
    pub fn from_runs(x: Option<f64>, label: String, runs: &[RunSummary]) -> Self {
        let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        let mut audit = ConstraintAudit::default();
        for r in runs {
            for (name, v) in r.metrics() {
                if let Some(v) = v {
                    samples.entry(name.to_string()).or_default().push(v);
                }
            }
            audit.merge(&r.audit);
        }
        Self {
            x,
            label,
            runs: runs.len(),
            metrics: samples
                .into_iter()
                .filter_map(|(k, v)| Stat::from_samples(&v).map(|s| (k, s)))
                .collect(),
            audit,
        }
    }
}

/// Contents of `aggregate.json`: one entry per sweep point, statistics
/// over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub schema_version: u32,
    pub series: String,
    pub mode: RunMode,
    pub axis: Option<String>,
    pub seeds: Vec<u64>,
    pub points: Vec<PointAggregate>,
}
