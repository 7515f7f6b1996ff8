//! Network, task, and reward constants.
//!
//! Every field has a shipped default; a TOML file only needs to list the
//! values it overrides. Units are SI unless the field name says otherwise
//! (distances in meters, bandwidths in Hz, powers in W, times in seconds,
//! computing capacities in CPU cycles per second).

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed interval used for uniformly drawn quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub low: f64,
    pub high: f64,
}

impl Range {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.low && x <= self.high
    }

    /// Min-max normalization into [0, 1]; a degenerate range maps to 0.
    pub fn normalize(&self, x: f64) -> f64 {
        let w = self.high - self.low;
        if w > 0.0 {
            ((x - self.low) / w).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.high > self.low {
            rng.gen_range(self.low..=self.high)
        } else {
            self.low
        }
    }
}

/// How the interference term of the uplink SINR pairs interferers with APs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceForm {
    /// Sum over the victim's cluster with interferer gains and interferer power.
    #[default]
    Corrected,
    /// Sum over the interferer's own cluster, without interferer power.
    Literal,
}

/// Reward shaping applied on top of the delay term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyForm {
    /// `-T + kappa * (tau - T)` exactly.
    #[default]
    Literal,
    /// Literal form plus a fixed `-kappa_drop * tau` for every dropped task.
    DropPenalty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub users: usize,
    pub aps: usize,
    pub cpus: usize,
    pub antennas_per_ap: usize,
    pub area_side: f64,
    pub cpu_positions: Vec<[f64; 2]>,
    pub cluster_size: usize,
    pub slot_duration: f64,

    pub access_bandwidth: f64,
    pub fronthaul_bandwidth: f64,
    pub noise_psd_dbm_hz: f64,
    pub carrier_mhz: f64,
    pub ap_height: f64,
    pub user_height: f64,
    pub shadow_std_db: f64,
    pub shadow_correlation: f64,
    pub breakpoint_near: f64,
    pub breakpoint_far: f64,

    pub blockage_density: f64,
    pub beamwidth_rad: f64,
    pub main_lobe_gain: f64,
    pub side_lobe_gain: f64,
    pub los_exponent: f64,
    pub nlos_exponent: f64,
    pub fronthaul_power: f64,

    pub max_power: f64,
    pub power_levels: Vec<f64>,

    pub task_size_bits: Range,
    pub task_density: Range,
    pub local_capacity: Range,
    pub edge_capacity: Range,

    pub penalty_noncoop: f64,
    pub penalty_coop: f64,
    pub penalty_form: PenaltyForm,
    pub drop_penalty: f64,
    pub episode_len: usize,

    /// Keep node positions and capacities fixed across episodes.
    pub fixed_topology: bool,
    /// Redraw shadowing every slot instead of once per episode.
    pub redraw_fading_per_slot: bool,
    /// Sample blockage and interference gains once per episode.
    pub freeze_fronthaul: bool,
    /// Single best-AP access with the fronthaul stage removed.
    pub cellular: bool,
    pub interference_form: InterferenceForm,
}

/// `count` evenly spaced levels from 0 to `max_power` inclusive.
pub fn power_ladder(max_power: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "a power ladder needs at least the 0 and max levels");
    (0..count)
        .map(|i| {
            if i + 1 == count {
                max_power
            } else {
                max_power * i as f64 / (count - 1) as f64
            }
        })
        .collect()
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let max_power = 0.1;
        Self {
            users: 10,
            aps: 50,
            cpus: 3,
            antennas_per_ap: 4,
            area_side: 900.0,
            cpu_positions: vec![[300.0, 300.0], [600.0, 300.0], [450.0, 600.0]],
            cluster_size: 4,
            slot_duration: 0.1,

            access_bandwidth: 20e6,
            fronthaul_bandwidth: 1e9,
            noise_psd_dbm_hz: -174.0,
            carrier_mhz: 1900.0,
            ap_height: 15.0,
            user_height: 1.65,
            shadow_std_db: 8.0,
            shadow_correlation: 0.5,
            breakpoint_near: 10.0,
            breakpoint_far: 15.0,

            blockage_density: 6e-4,
            beamwidth_rad: PI / 6.0,
            main_lobe_gain: 10.0,
            side_lobe_gain: 0.1,
            los_exponent: 2.5,
            nlos_exponent: 4.0,
            fronthaul_power: 1.0,

            max_power,
            power_levels: power_ladder(max_power, 6),

            task_size_bits: Range::new(4e5, 8e5),
            task_density: Range::new(500.0, 1000.0),
            local_capacity: Range::new(2e9, 5e9),
            edge_capacity: Range::new(10e9, 20e9),

            penalty_noncoop: 0.6,
            penalty_coop: 0.8,
            penalty_form: PenaltyForm::Literal,
            drop_penalty: 1.0,
            episode_len: 300,

            fixed_topology: false,
            redraw_fading_per_slot: false,
            freeze_fronthaul: false,
            cellular: false,
            interference_form: InterferenceForm::Corrected,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl NetworkConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Cellular-offloading preset: singleton best-AP clusters, no fronthaul stage.
    pub fn into_cellular(mut self) -> Self {
        self.cellular = true;
        self.cluster_size = 1;
        self
    }

    /// Clusters actually used for serving (1 in cellular mode).
    pub fn effective_cluster_size(&self) -> usize {
        if self.cellular {
            1
        } else {
            self.cluster_size
        }
    }

    /// Rescale the power ladder to a new maximum, keeping its level count.
    pub fn with_max_power(mut self, max_power: f64) -> Self {
        let count = self.power_levels.len().max(2);
        self.max_power = max_power;
        self.power_levels = power_ladder(max_power, count);
        self
    }

    /// Access-link noise power over the access bandwidth (W).
    pub fn access_noise(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * self.access_bandwidth.log10())
    }

    /// Fronthaul noise power over the fronthaul bandwidth (W).
    pub fn fronthaul_noise(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz + 10.0 * self.fronthaul_bandwidth.log10())
    }

    /// Pilot length: one orthogonal pilot per user.
    pub fn pilot_length(&self) -> usize {
        self.users
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.users == 0 {
            return fail("users must be >= 1".into());
        }
        if self.cpus == 0 {
            return fail("cpus must be >= 1".into());
        }
        if self.antennas_per_ap == 0 {
            return fail("antennas_per_ap must be >= 1".into());
        }
        if self.cluster_size == 0 || self.cluster_size > self.aps {
            return fail(format!(
                "cluster_size must satisfy 1 <= cluster_size ({}) <= aps ({})",
                self.cluster_size, self.aps
            ));
        }
        if !(self.area_side > 0.0) {
            return fail("area_side must be positive".into());
        }
        if self.cpu_positions.len() != self.cpus {
            return fail(format!(
                "cpu_positions has {} entries, expected {}",
                self.cpu_positions.len(),
                self.cpus
            ));
        }
        for (k, p) in self.cpu_positions.iter().enumerate() {
            let inside = |v: f64| (0.0..=self.area_side).contains(&v);
            if !inside(p[0]) || !inside(p[1]) {
                return fail(format!("cpu {k} at ({}, {}) lies outside the area", p[0], p[1]));
            }
        }
        if !(self.slot_duration > 0.0) {
            return fail("slot_duration must be positive".into());
        }
        if !(self.breakpoint_near < self.breakpoint_far) || self.breakpoint_near <= 0.0 {
            return fail("path-loss breakpoints must satisfy 0 < near < far".into());
        }
        if !(0.0..=1.0).contains(&self.shadow_correlation) {
            return fail("shadow_correlation must lie in [0, 1]".into());
        }
        if !(self.beamwidth_rad > 0.0 && self.beamwidth_rad <= 2.0 * PI) {
            return fail("beamwidth_rad must lie in (0, 2*pi]".into());
        }
        let lv = &self.power_levels;
        if lv.len() < 2 {
            return fail("power_levels needs at least two entries".into());
        }
        if lv[0] != 0.0 || *lv.last().unwrap() != self.max_power {
            return fail("power_levels must start at 0 and end at max_power".into());
        }
        if lv.windows(2).any(|w| !(w[0] < w[1])) {
            return fail("power_levels must be strictly ascending".into());
        }
        for (name, r) in [
            ("task_size_bits", self.task_size_bits),
            ("task_density", self.task_density),
            ("local_capacity", self.local_capacity),
            ("edge_capacity", self.edge_capacity),
        ] {
            if !(r.low <= r.high) || !(r.low > 0.0) {
                return fail(format!("{name} must satisfy 0 < low <= high"));
            }
        }
        for (name, v) in [
            ("access_bandwidth", self.access_bandwidth),
            ("fronthaul_bandwidth", self.fronthaul_bandwidth),
            ("fronthaul_power", self.fronthaul_power),
            ("max_power", self.max_power),
        ] {
            if !(v > 0.0) {
                return fail(format!("{name} must be positive"));
            }
        }
        if self.episode_len == 0 {
            return fail("episode_len must be >= 1".into());
        }
        Ok(())
    }
}
