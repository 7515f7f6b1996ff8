//! Policy evaluation and per-slot metrics.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::train::PolicySet;
use crate::env::{Action, ConstraintAudit, Env};
use crate::error::Result;

/// Anything that picks one action per user from the current observations.
pub trait Policy {
    fn actions(&mut self, observations: &[Vec<f64>], env: &Env) -> Vec<Action>;
}

/// Trained actors act greedily.
impl Policy for PolicySet {
    fn actions(&mut self, observations: &[Vec<f64>], _env: &Env) -> Vec<Action> {
        observations.iter().enumerate().map(|(m, o)| self.greedy(m, o)).collect()
    }
}

/// One row of the metrics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub episode: usize,
    pub slot: usize,
    pub user: usize,
    /// Empty for users processing locally.
    pub rate_a: Option<f64>,
    pub sinr_a: Option<f64>,
    #[serde(rename = "T^l")]
    pub local: f64,
    #[serde(rename = "T^a")]
    pub access: f64,
    #[serde(rename = "T^f")]
    pub fronthaul: f64,
    #[serde(rename = "T^e")]
    pub edge: f64,
    #[serde(rename = "T")]
    pub total: f64,
    pub dropped: u8,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub user_slots: usize,
    pub offload_fraction: f64,
    /// Over offloading user-slots; `None` if nobody offloaded.
    pub mean_rate: Option<f64>,
    pub mean_sinr: Option<f64>,
    pub mean_local: f64,
    pub mean_access: f64,
    pub mean_fronthaul: f64,
    pub mean_edge: f64,
    pub mean_delay: f64,
    pub drop_rate: f64,
    pub mean_reward: f64,
}

impl Summary {
    pub fn from_records(records: &[SlotRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return Self::default();
        }
        let mean = |f: fn(&SlotRecord) -> f64| records.iter().map(f).sum::<f64>() / n as f64;
        let rates: Vec<(f64, f64)> = records.iter().filter_map(|r| r.rate_a.zip(r.sinr_a)).collect();
        let k = rates.len() as f64;
        Self {
            user_slots: n,
            offload_fraction: k / n as f64,
            mean_rate: (!rates.is_empty()).then(|| rates.iter().map(|r| r.0).sum::<f64>() / k),
            mean_sinr: (!rates.is_empty()).then(|| rates.iter().map(|r| r.1).sum::<f64>() / k),
            mean_local: mean(|r| r.local),
            mean_access: mean(|r| r.access),
            mean_fronthaul: mean(|r| r.fronthaul),
            mean_edge: mean(|r| r.edge),
            mean_delay: mean(|r| r.total),
            drop_rate: mean(|r| f64::from(r.dropped)),
            mean_reward: mean(|r| r.reward),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub records: Vec<SlotRecord>,
    pub summary: Summary,
    pub audit: ConstraintAudit,
}

/// Roll `policy` through `episodes` of the run seeded by `seed`.
pub fn evaluate(policy: &mut dyn Policy, env: &mut Env, seed: u64, episodes: Range<usize>) -> Result<Evaluation> {
    let before = env.audit();
    let mut records = Vec::new();
    for episode in episodes {
        let mut obs = env.reset(seed, episode as u64)?;
        loop {
            let actions = policy.actions(&obs, env);
            let step = env.step(&actions);
            for (user, u) in step.users.iter().enumerate() {
                records.push(SlotRecord {
                    episode,
                    slot: step.slot,
                    user,
                    rate_a: u.rate,
                    sinr_a: u.sinr,
                    local: u.delay.local,
                    access: u.delay.access,
                    fronthaul: u.delay.fronthaul,
                    edge: u.delay.edge,
                    total: u.delay.total,
                    dropped: u8::from(u.delay.dropped),
                    reward: u.reward,
                });
            }
            obs = step.observations;
            if step.done {
                break;
            }
        }
    }
    let after = env.audit();
    let audit = ConstraintAudit {
        slots: after.slots - before.slots,
        multi_cpu_offloads: after.multi_cpu_offloads - before.multi_cpu_offloads,
        invalid_powers: after.invalid_powers - before.invalid_powers,
        wrong_cluster_sizes: after.wrong_cluster_sizes - before.wrong_cluster_sizes,
        deadline_overruns: after.deadline_overruns - before.deadline_overruns,
        drops: after.drops - before.drops,
    };
    Ok(Evaluation {
        summary: Summary::from_records(&records),
        records,
        audit,
    })
}
