//! Experiment orchestration: specs, runs, sweeps, metrics files, and
//! plot data.

mod aggregate;
mod plots;
mod run;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use aggregate::{Aggregate, PointAggregate, RunSummary, Stat, SCHEMA_VERSION};
pub use plots::{emit_plots, PlotReport, PLOT_SCRIPT};
pub use run::{read_metrics_csv, run, run_single, write_metrics_csv, RunReport, RunResult};

use crate::error::{Error, Result};
use crate::marl::TrainConfig;
use crate::NetworkConfig;

/// What a run trains and evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Ippo,
    Mappo,
    Cbo,
    Mpo,
    Random,
    LocalOnly,
}

impl RunMode {
    pub const ALL: [RunMode; 6] = [
        RunMode::Ippo,
        RunMode::Mappo,
        RunMode::Cbo,
        RunMode::Mpo,
        RunMode::Random,
        RunMode::LocalOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMode::Ippo => "ippo",
            RunMode::Mappo => "mappo",
            RunMode::Cbo => "cbo",
            RunMode::Mpo => "mpo",
            RunMode::Random => "random",
            RunMode::LocalOnly => "local_only",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown mode {s:?}")))
    }

    pub fn is_trained(self) -> bool {
        !matches!(self, RunMode::Random | RunMode::LocalOnly)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Users,
    Aps,
    MaxPower,
    ClusterSize,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Users => "users",
            SweepAxis::Aps => "aps",
            SweepAxis::MaxPower => "max_power",
            SweepAxis::ClusterSize => "cluster_size",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [SweepAxis::Users, SweepAxis::Aps, SweepAxis::MaxPower, SweepAxis::ClusterSize]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Spec(format!("unknown sweep axis {s:?}")))
    }

    /// `config` with this axis set to `value`.
    pub fn apply(self, config: &NetworkConfig, value: f64) -> Result<NetworkConfig> {
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::Spec(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        let out = match self {
            SweepAxis::Users => NetworkConfig {
                users: count()?,
                ..config.clone()
            },
            SweepAxis::Aps => NetworkConfig {
                aps: count()?,
                ..config.clone()
            },
            SweepAxis::ClusterSize => NetworkConfig {
                cluster_size: count()?,
                ..config.clone()
            },
            SweepAxis::MaxPower => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(Error::Spec(format!("max_power must be positive, got {value}")));
                }
                config.clone().with_max_power(value)
            }
        };
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// One experiment: a mode, a network, seeds, and an optional sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Series name in plot data; defaults to the mode name.
    pub scenario: String,
    pub mode: RunMode,
    pub seeds: Vec<u64>,
    /// Evaluation episodes run after training (indices follow the training
    /// episodes, so evaluation topologies are unseen).
    pub eval_episodes: usize,
    pub sweep: Option<Sweep>,
    pub network: NetworkConfig,
    pub train: TrainConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: String::new(),
            mode: RunMode::Ippo,
            seeds: vec![1, 2, 3],
            eval_episodes: 5,
            sweep: None,
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn series(&self) -> &str {
        if self.scenario.is_empty() {
            self.mode.name()
        } else {
            &self.scenario
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Spec("at least one seed is required".into()));
        }
        if self.eval_episodes == 0 {
            return Err(Error::Spec("eval_episodes must be positive".into()));
        }
        self.network.validate()?;
        self.train.validate()?;
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Spec("sweep needs at least one value".into()));
            }
            for &v in &s.values {
                s.axis.apply(&self.network, v)?;
            }
        }
        Ok(())
    }

    /// Network configuration at each sweep point (`x = None` without a sweep).
    pub fn points(&self) -> Result<Vec<(Option<f64>, NetworkConfig)>> {
        match &self.sweep {
            None => Ok(vec![(None, self.network.clone())]),
            Some(s) => s
                .values
                .iter()
                .map(|&v| Ok((Some(v), s.axis.apply(&self.network, v)?)))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_and_axis_names_round_trip() {
        for m in RunMode::ALL {
            assert_eq!(RunMode::parse(m.name()).unwrap(), m);
        }
        assert!(RunMode::parse("maddpg").is_err());
        assert_eq!(SweepAxis::parse("max_power").unwrap(), SweepAxis::MaxPower);
    }

    #[test]
    fn sweep_points() {
        let spec = ExperimentSpec {
            sweep: Some(Sweep {
                axis: SweepAxis::Users,
                values: vec![5.0, 10.0, 15.0],
            }),
            ..ExperimentSpec::default()
        };
        let pts = spec.points().unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[2].1.users, 15);
        assert!(SweepAxis::Users.apply(&spec.network, 2.5).is_err());
        assert!(SweepAxis::ClusterSize.apply(&spec.network, 60.0).is_err());
        let p = SweepAxis::MaxPower.apply(&spec.network, 0.2).unwrap();
        assert_eq!(p.max_power, 0.2);
        assert_eq!(*p.power_levels.last().unwrap(), 0.2);
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = ExperimentSpec {
            mode: RunMode::Cbo,
            seeds: vec![4],
            ..ExperimentSpec::default()
        };
        let back = ExperimentSpec::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, spec);
        let partial = ExperimentSpec::from_toml_str("mode = \"random\"\nseeds = [7]\n[network]\nusers = 4\n").unwrap();
        assert_eq!(partial.network.users, 4);
        assert_eq!(partial.network.aps, 50);
        assert!(ExperimentSpec::from_toml_str("seeds = []").is_err());
        assert!(ExperimentSpec::from_toml_str("bogus = 1").is_err());
    }
}
