//! Simulator and learning stack for user-centric mobile edge computing.
//!
//! Users offload tasks through personal clusters of cooperating access
//! points; the APs forward over a mmWave fronthaul to CPUs that host edge
//! servers. Each slot, users pick an offload target and uplink power, the
//! CPUs split their computing capacity, and the per-user delay is scored
//! against the slot deadline.

pub mod access;
pub mod allocator;
pub mod baselines;
pub mod config;
pub mod delay;
pub mod env;
pub mod error;
pub mod fronthaul;
pub mod harness;
pub mod marl;
pub mod par;
pub mod seed;
pub mod topology;

pub use config::NetworkConfig;
pub use error::{Error, Result};
