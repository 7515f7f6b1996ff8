//! PPO machinery: networks, distributions, advantage estimation, losses,
//! optimizers, and the IPPO/MAPPO training loops.

pub mod buffer;
pub mod checkpoint;
pub mod dist;
pub mod eval;
pub mod gae;
pub mod loss;
pub mod nn;
pub mod optim;
pub mod train;

pub use eval::{evaluate, Evaluation, Policy, SlotRecord, Summary};
pub use train::{train, train_ippo, train_mappo, CurvePoint, PolicySet, Scheme, TrainConfig, TrainOutcome};
