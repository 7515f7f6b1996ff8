//! Slotted multi-user environment.
//!
//! Each slot every user observes its task and recent history, picks an
//! offload target and a power level, and the environment resolves uplink
//! rates, fronthaul rates, per-CPU allocation, delays, and rewards.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::access::{self, AccessChannelState, PowerAssignment};
use crate::allocator::{allocate, AllocationInstance};
use crate::config::{NetworkConfig, PenaltyForm};
use crate::delay::{self, compute_delays, DelayBreakdown, DelayInputs, OffloadDecision, TaskBatch};
use crate::error::Result;
use crate::fronthaul::{fronthaul_rates, FronthaulState};
use crate::seed::{Rng, SeedTree, Stream};
use crate::topology::{place_nodes, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Local observations, per-user rewards.
    NonCooperative,
    /// Observations include other users' last actions; shared reward.
    Cooperative,
}

/// One user's decision: `target` 0 is local, `k >= 1` offloads to CPU `k - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Action {
    pub target: usize,
    pub power_idx: usize,
}

impl Action {
    pub const fn new(target: usize, power_idx: usize) -> Self {
        Self { target, power_idx }
    }

    pub fn cpu(&self) -> Option<usize> {
        self.target.checked_sub(1)
    }
}

pub fn reward_noncoop(delay: f64, deadline: f64, weight: f64) -> f64 {
    -delay + weight * (deadline - delay)
}

pub fn reward_coop(delays: &[f64], deadline: f64, weight: f64) -> f64 {
    let m = delays.len() as f64;
    let mean: f64 = delays.iter().sum::<f64>() / m;
    let slack: f64 = delays.iter().map(|t| deadline - t).sum::<f64>() / m;
    -mean + weight * slack
}

/// Fixed-width observation encoding for one mode.
///
/// Non-cooperative: `[size, density, prev_delay, slot_progress,
/// onehot(prev_target; K+1), onehot(prev_power; |P|)]`. Cooperative appends
/// the previous action one-hots of every other user (ascending index) and
/// the previous slot's mean delay. Sizes and densities are min-max
/// normalized by their configured ranges and delays by the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservationLayout {
    pub users: usize,
    pub targets: usize,
    pub powers: usize,
    pub mode: Mode,
}

impl ObservationLayout {
    pub const SCALARS: usize = 4;

    pub fn new(config: &NetworkConfig, mode: Mode) -> Self {
        Self {
            users: config.users,
            targets: config.cpus + 1,
            powers: config.power_levels.len(),
            mode,
        }
    }

    pub fn action_width(&self) -> usize {
        self.targets + self.powers
    }

    pub fn width(&self) -> usize {
        let own = Self::SCALARS + self.action_width();
        match self.mode {
            Mode::NonCooperative => own,
            Mode::Cooperative => own + (self.users - 1) * self.action_width() + 1,
        }
    }

    /// Width of the centralized critic's input (all observations concatenated).
    pub fn global_width(&self) -> usize {
        self.users * self.width()
    }
}

/// Per-user measurements for one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSlot {
    pub action: Action,
    /// Uplink SINR and rate; `None` for users processing locally.
    pub sinr: Option<f64>,
    pub rate: Option<f64>,
    pub delay: DelayBreakdown,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Vec<f64>>,
    /// Per user; identical entries in cooperative mode.
    pub rewards: Vec<f64>,
    pub users: Vec<UserSlot>,
    /// Slot index that was just resolved.
    pub slot: usize,
    pub done: bool,
}

/// Running tally of constraint checks performed every slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub slots: u64,
    pub multi_cpu_offloads: u64,
    pub invalid_powers: u64,
    pub wrong_cluster_sizes: u64,
    pub deadline_overruns: u64,
    pub drops: u64,
}

impl ConstraintAudit {
    pub fn violations(&self) -> u64 {
        self.multi_cpu_offloads + self.invalid_powers + self.wrong_cluster_sizes + self.deadline_overruns
    }

    pub fn merge(&mut self, other: &ConstraintAudit) {
        self.slots += other.slots;
        self.multi_cpu_offloads += other.multi_cpu_offloads;
        self.invalid_powers += other.invalid_powers;
        self.wrong_cluster_sizes += other.wrong_cluster_sizes;
        self.deadline_overruns += other.deadline_overruns;
        self.drops += other.drops;
    }
}

pub struct Env {
    config: NetworkConfig,
    mode: Mode,
    layout: ObservationLayout,
    seeds: SeedTree,
    episode: u64,
    slot: usize,
    topology: Topology,
    access: AccessChannelState,
    tasks: TaskBatch,
    task_rng: Rng,
    blockage_rng: Rng,
    shadow_rng: Rng,
    frozen_fronthaul: Option<FronthaulState>,
    prev_actions: Vec<Option<Action>>,
    prev_delays: Vec<f64>,
    audit: ConstraintAudit,
}

impl Env {
    /// Build an environment and reset it to episode 0 of `master_seed`.
    pub fn new(config: NetworkConfig, mode: Mode, master_seed: u64) -> Result<Self> {
        config.validate()?;
        let seeds = SeedTree::new(master_seed);
        let layout = ObservationLayout::new(&config, mode);
        let topology = place_nodes(&config, seeds.derive(Stream::Placement, 0))?;
        let mut shadow_rng = seeds.rng(Stream::Shadowing, 0);
        let shadow = access::draw_shadowing(&mut shadow_rng, config.users, config.aps, config.shadow_correlation);
        let access = AccessChannelState::build(&config, &topology, shadow);
        let mut task_rng = seeds.rng(Stream::Tasks, 0);
        let tasks = TaskBatch::draw(&config, &mut task_rng);
        let users = config.users;
        let mut env = Self {
            blockage_rng: seeds.rng(Stream::Blockage, 0),
            config,
            mode,
            layout,
            seeds,
            episode: 0,
            slot: 0,
            topology,
            access,
            tasks,
            task_rng,
            shadow_rng,
            frozen_fronthaul: None,
            prev_actions: vec![None; users],
            prev_delays: vec![0.0; users],
            audit: ConstraintAudit::default(),
        };
        env.reset(master_seed, 0)?;
        Ok(env)
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn layout(&self) -> ObservationLayout {
        self.layout
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn access(&self) -> &AccessChannelState {
        &self.access
    }

    pub fn tasks(&self) -> &TaskBatch {
        &self.tasks
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn audit(&self) -> ConstraintAudit {
        self.audit
    }

    /// Start `episode_index` of the run seeded by `master_seed`.
    pub fn reset(&mut self, master_seed: u64, episode_index: u64) -> Result<Vec<Vec<f64>>> {
        self.seeds = SeedTree::new(master_seed);
        self.episode = episode_index;
        self.slot = 0;
        let placement_index = if self.config.fixed_topology { 0 } else { episode_index };
        self.topology = place_nodes(&self.config, self.seeds.derive(Stream::Placement, placement_index))?;
        self.shadow_rng = self.seeds.rng(Stream::Shadowing, episode_index);
        self.rebuild_access();
        self.task_rng = self.seeds.rng(Stream::Tasks, episode_index);
        self.blockage_rng = self.seeds.rng(Stream::Blockage, episode_index);
        let cfg = &self.config;
        self.frozen_fronthaul = if cfg.freeze_fronthaul && !cfg.cellular {
            Some(FronthaulState::sample(cfg, &self.topology.dist_ak, &mut self.blockage_rng))
        } else {
            None
        };
        self.tasks = TaskBatch::draw(&self.config, &mut self.task_rng);
        self.prev_actions = vec![None; self.config.users];
        self.prev_delays = vec![0.0; self.config.users];
        Ok(self.observations())
    }

    fn rebuild_access(&mut self) {
        let cfg = &self.config;
        let shadow = access::draw_shadowing(&mut self.shadow_rng, cfg.users, cfg.aps, cfg.shadow_correlation);
        self.access = AccessChannelState::build(cfg, &self.topology, shadow);
    }

    fn encode_action(&self, out: &mut Vec<f64>, action: Option<Action>) {
        let start = out.len();
        out.resize(start + self.layout.action_width(), 0.0);
        if let Some(a) = action {
            out[start + a.target] = 1.0;
            out[start + self.layout.targets + a.power_idx] = 1.0;
        }
    }

    pub fn observation(&self, m: usize) -> Vec<f64> {
        let cfg = &self.config;
        let mut o = Vec::with_capacity(self.layout.width());
        o.push(cfg.task_size_bits.normalize(self.tasks.size_bits[m]));
        o.push(cfg.task_density.normalize(self.tasks.density[m]));
        o.push(self.prev_delays[m] / cfg.slot_duration);
        o.push(self.slot as f64 / cfg.episode_len as f64);
        self.encode_action(&mut o, self.prev_actions[m]);
        if self.mode == Mode::Cooperative {
            for i in (0..cfg.users).filter(|&i| i != m) {
                self.encode_action(&mut o, self.prev_actions[i]);
            }
            let mean = self.prev_delays.iter().sum::<f64>() / cfg.users as f64;
            o.push(mean / cfg.slot_duration);
        }
        debug_assert_eq!(o.len(), self.layout.width());
        o
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        (0..self.config.users).map(|m| self.observation(m)).collect()
    }

    /// Concatenated observations of all users.
    pub fn global_state(observations: &[Vec<f64>]) -> Vec<f64> {
        observations.concat()
    }

    /// Resolve one slot.
    ///
    /// # Panics
    /// On a wrong number of actions or an out-of-range target/power index.
    pub fn step(&mut self, actions: &[Action]) -> StepResult {
        let cfg = &self.config;
        assert_eq!(actions.len(), cfg.users, "one action per user");
        for a in actions {
            assert!(a.target <= cfg.cpus, "target {} out of range", a.target);
            assert!(a.power_idx < cfg.power_levels.len(), "power index {} out of range", a.power_idx);
        }
        if cfg.redraw_fading_per_slot && self.slot > 0 {
            self.rebuild_access();
        }
        let cfg = &self.config;
        let decision = OffloadDecision::new(actions.iter().map(Action::cpu).collect(), cfg.cpus);
        // users computing locally stay silent on the uplink
        let powers = PowerAssignment(
            actions
                .iter()
                .map(|a| if a.target > 0 { cfg.power_levels[a.power_idx] } else { 0.0 })
                .collect(),
        );
        let sinr = access::uplink_sinrs(&powers, &self.access, cfg.antennas_per_ap, cfg.access_noise(), cfg.interference_form);
        let uplink: Vec<f64> = sinr.iter().map(|&z| access::uplink_rate(z, cfg.access_bandwidth)).collect();

        let fronthaul: Option<Array2<f64>> = if cfg.cellular {
            None
        } else {
            let state = match &self.frozen_fronthaul {
                Some(s) => s.clone(),
                None => FronthaulState::sample(cfg, &self.topology.dist_ak, &mut self.blockage_rng),
            };
            let active = delay::active_links(&decision, &self.access.clusters, cfg.aps);
            Some(fronthaul_rates(&state.with_active(active), &self.topology.dist_ak, cfg))
        };

        let mut allocation = vec![0.0; cfg.users];
        {
            let probe = DelayInputs {
                decision: &decision,
                tasks: &self.tasks,
                clusters: &self.access.clusters,
                uplink_rates: &uplink,
                fronthaul_rates: fronthaul.as_ref(),
                allocation: &allocation,
                local_capacity: &self.topology.local_capacity,
                deadline: cfg.slot_duration,
            };
            let mut grants = Vec::new();
            for k in 0..cfg.cpus {
                let members: Vec<usize> = decision.offloaders(k).collect();
                if members.is_empty() {
                    continue;
                }
                let instance = AllocationInstance {
                    workload: members.iter().map(|&m| self.tasks.workload(m)).collect(),
                    transfer_delay: members
                        .iter()
                        .map(|&m| {
                            let (a, f) = delay::transfer_delay(m, k, &probe);
                            a + f
                        })
                        .collect(),
                    capacity: self.topology.edge_capacity[k],
                    deadline: cfg.slot_duration,
                };
                let out = allocate(&instance);
                grants.extend(members.into_iter().zip(out.cycles));
            }
            for (m, c) in grants {
                allocation[m] = c;
            }
        }

        let delays = compute_delays(&DelayInputs {
            decision: &decision,
            tasks: &self.tasks,
            clusters: &self.access.clusters,
            uplink_rates: &uplink,
            fronthaul_rates: fronthaul.as_ref(),
            allocation: &allocation,
            local_capacity: &self.topology.local_capacity,
            deadline: cfg.slot_duration,
        });

        let tau = cfg.slot_duration;
        let drop_term = |dropped: bool| {
            if cfg.penalty_form == PenaltyForm::DropPenalty && dropped {
                cfg.drop_penalty * tau
            } else {
                0.0
            }
        };
        let totals: Vec<f64> = delays.iter().map(|d| d.total).collect();
        let rewards: Vec<f64> = match self.mode {
            Mode::NonCooperative => delays
                .iter()
                .map(|d| reward_noncoop(d.total, tau, cfg.penalty_noncoop) - drop_term(d.dropped))
                .collect(),
            Mode::Cooperative => {
                let drops: f64 = delays.iter().map(|d| drop_term(d.dropped)).sum::<f64>() / cfg.users as f64;
                vec![reward_coop(&totals, tau, cfg.penalty_coop) - drops; cfg.users]
            }
        };

        let users: Vec<UserSlot> = (0..cfg.users)
            .map(|m| {
                let offloading = actions[m].target > 0;
                UserSlot {
                    action: actions[m],
                    sinr: offloading.then_some(sinr[m]),
                    rate: offloading.then_some(uplink[m]),
                    delay: delays[m],
                    reward: rewards[m],
                }
            })
            .collect();

        self.record_audit(&decision, &powers, &delays);
        let slot = self.slot;
        self.prev_actions = actions.iter().copied().map(Some).collect();
        self.prev_delays = totals;
        self.slot += 1;
        self.tasks = TaskBatch::draw(&self.config, &mut self.task_rng);
        StepResult {
            observations: self.observations(),
            rewards,
            users,
            slot,
            done: self.slot >= self.config.episode_len,
        }
    }

    fn record_audit(&mut self, decision: &OffloadDecision, powers: &PowerAssignment, delays: &[DelayBreakdown]) {
        let cfg = &self.config;
        let a = &mut self.audit;
        a.slots += 1;
        a.multi_cpu_offloads += decision
            .matrix()
            .rows()
            .into_iter()
            .filter(|r| r.iter().map(|&v| v as u32).sum::<u32>() > 1)
            .count() as u64;
        a.invalid_powers += powers
            .as_slice()
            .iter()
            .zip(decision.targets())
            .filter(|(p, t)| t.is_some() && !cfg.power_levels.contains(p))
            .count() as u64;
        let size = cfg.effective_cluster_size();
        a.wrong_cluster_sizes += self.access.clusters.per_user.iter().filter(|c| c.len() != size).count() as u64;
        a.deadline_overruns += delays.iter().filter(|d| d.total > cfg.slot_duration).count() as u64;
        a.drops += delays.iter().filter(|d| d.dropped).count() as u64;
    }
}
