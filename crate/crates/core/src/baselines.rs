//! Comparison policies.
//!
//! Random and local-only are fixed rules. CBO and MPO reuse the PPO
//! trainers: CBO on the cellular variant of the network, MPO with the power
//! head pinned to the top of the ladder.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Env};
use crate::marl::{Policy, TrainConfig};
use crate::seed::{Rng, SeedTree, Stream};
use crate::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Cbo,
    Mpo,
    Random,
    LocalOnly,
}

/// Uniform over every (target, power) pair.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    rng: Rng,
    targets: usize,
    powers: usize,
}

impl RandomPolicy {
    pub fn new(config: &NetworkConfig, seed: u64) -> Self {
        Self {
            rng: SeedTree::new(seed).rng(Stream::Baseline, 0),
            targets: config.cpus + 1,
            powers: config.power_levels.len(),
        }
    }

    pub fn draw(&mut self) -> Action {
        Action::new(self.rng.gen_range(0..self.targets), self.rng.gen_range(0..self.powers))
    }
}

impl Policy for RandomPolicy {
    fn actions(&mut self, observations: &[Vec<f64>], _env: &Env) -> Vec<Action> {
        observations.iter().map(|_| self.draw()).collect()
    }
}

/// Every task is processed on the user device.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalOnlyPolicy;

impl Policy for LocalOnlyPolicy {
    fn actions(&mut self, observations: &[Vec<f64>], _env: &Env) -> Vec<Action> {
        vec![Action::new(0, 0); observations.len()]
    }
}

/// Network for the cellular baseline: one serving AP, no fronthaul.
pub fn cbo_network(config: &NetworkConfig) -> NetworkConfig {
    config.clone().into_cellular()
}

/// Training preset for the maximum-power baseline.
pub fn mpo_train_config(config: &NetworkConfig, base: &TrainConfig) -> TrainConfig {
    TrainConfig {
        power_override: Some(config.power_levels.len() - 1),
        ..base.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Mode;

    #[test]
    fn random_frequencies_are_uniform() {
        let cfg = NetworkConfig::default();
        let mut p = RandomPolicy::new(&cfg, 9);
        let (t, w) = (cfg.cpus + 1, cfg.power_levels.len());
        let mut counts = vec![0usize; t * w];
        let n = 100_000;
        for _ in 0..n {
            let a = p.draw();
            counts[a.target * w + a.power_idx] += 1;
        }
        let q = 1.0 / (t * w) as f64;
        let sd = (n as f64 * q * (1.0 - q)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * q).abs() < 3.0 * sd, "{c}");
        }
    }

    #[test]
    fn local_only_reward_is_local_delay_composition() {
        let cfg = NetworkConfig {
            users: 5,
            aps: 12,
            ..NetworkConfig::default()
        };
        let mut env = Env::new(cfg.clone(), Mode::NonCooperative, 4).unwrap();
        let obs = env.observations();
        let actions = LocalOnlyPolicy.actions(&obs, &env);
        let workload: Vec<f64> = (0..cfg.users).map(|m| env.tasks().workload(m)).collect();
        let local = env.topology().local_capacity.clone();
        let r = env.step(&actions);
        let tau = cfg.slot_duration;
        for (m, u) in r.users.iter().enumerate() {
            let raw = workload[m] / local[m];
            assert_eq!(u.delay.dropped, raw > tau);
            assert_eq!(u.delay.total, raw.min(tau));
            assert_eq!(u.reward, -u.delay.total + cfg.penalty_noncoop * (tau - u.delay.total));
            assert_eq!(u.rate, None);
        }
    }

    #[test]
    fn presets() {
        let cfg = NetworkConfig::default();
        let cbo = cbo_network(&cfg);
        assert!(cbo.cellular);
        assert_eq!(cbo.effective_cluster_size(), 1);
        let mpo = mpo_train_config(&cfg, &TrainConfig::default());
        assert_eq!(mpo.power_override, Some(cfg.power_levels.len() - 1));
    }
}
