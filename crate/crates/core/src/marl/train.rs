//! IPPO and MAPPO training loops.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::buffer::RolloutBuffer;
use super::dist::Categorical;
use super::gae::{gae, normalize};
use super::loss::{actor_loss_and_grad, critic_loss_and_grad, ActorBatch, HeadLayout};
use super::nn::Mlp;
use super::optim::{clip_grad_norm, Optimizer, OptimizerKind};
use crate::env::{Action, ConstraintAudit, Env, Mode};
use crate::error::{Error, Result};
use crate::par;
use crate::seed::{Rng, SeedTree, Stream};
use crate::NetworkConfig;

/// Seed-stream index offset separating critic networks from actors.
const CRITIC_INDEX: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Environment steps collected between updates.
    pub rollout: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub episodes: usize,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerKind,
    /// One actor for all users instead of one per user.
    pub shared_actor: bool,
    /// Clip the critic update around the old value. `None` picks the scheme
    /// default: off for IPPO, on for MAPPO.
    pub value_clip: Option<bool>,
    /// Fix every offloading user's power to this ladder index and learn
    /// only the target head.
    pub power_override: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip: 0.2,
            actor_lr: 5e-4,
            critic_lr: 5e-4,
            rollout: 2048,
            minibatch: 64,
            epochs: 10,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            episodes: 1000,
            hidden: vec![64, 64],
            optimizer: OptimizerKind::Adam,
            shared_actor: false,
            value_clip: None,
            power_override: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.gamma) || !unit(self.gae_lambda) {
            return Err(Error::Config("gamma and gae_lambda must lie in [0, 1]".into()));
        }
        if !(self.clip > 0.0) {
            return Err(Error::Config("clip must be positive".into()));
        }
        if self.actor_lr < 0.0 || self.critic_lr < 0.0 || !self.actor_lr.is_finite() || !self.critic_lr.is_finite() {
            return Err(Error::Config("learning rates must be finite and non-negative".into()));
        }
        if self.rollout == 0 || self.minibatch == 0 || self.epochs == 0 {
            return Err(Error::Config("rollout, minibatch and epochs must be positive".into()));
        }
        if !(self.max_grad_norm > 0.0) {
            return Err(Error::Config("max_grad_norm must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Per-user actor and critic on local data.
    Ippo,
    /// Per-user actors and one critic on the concatenated observations.
    Mappo,
}

impl Scheme {
    pub fn env_mode(self) -> Mode {
        match self {
            Scheme::Ippo => Mode::NonCooperative,
            Scheme::Mappo => Mode::Cooperative,
        }
    }

    fn default_value_clip(self) -> bool {
        self == Scheme::Mappo
    }
}

/// Decentralized actors: everything needed to act after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    pub actors: Vec<Mlp>,
    pub heads: HeadLayout,
    pub shared: bool,
    pub power_override: Option<usize>,
}

impl PolicySet {
    pub fn actor(&self, user: usize) -> &Mlp {
        if self.shared {
            &self.actors[0]
        } else {
            &self.actors[user]
        }
    }

    /// Sampled action and its log-probability.
    pub fn sample(&self, user: usize, observation: &[f64], rng: &mut Rng) -> (Action, f64) {
        sample_action(self.actor(user), self.heads, self.power_override, observation, rng)
    }

    /// Most likely action under each head.
    pub fn greedy(&self, user: usize, observation: &[f64]) -> Action {
        let logits = self.actor(user).forward_one(observation);
        let target = Categorical::from_logits(&logits[..self.heads.targets]).argmax();
        let power_idx = match self.power_override {
            Some(p) => p,
            None => Categorical::from_logits(&logits[self.heads.targets..]).argmax(),
        };
        Action::new(target, power_idx)
    }
}

fn sample_action(actor: &Mlp, heads: HeadLayout, power_override: Option<usize>, observation: &[f64], rng: &mut Rng) -> (Action, f64) {
    let logits = actor.forward_one(observation);
    let target = Categorical::from_logits(&logits[..heads.targets]).sample(rng);
    let power_idx = match power_override {
        Some(p) => p,
        None => Categorical::from_logits(&logits[heads.targets..]).sample(rng),
    };
    let action = Action::new(target, power_idx);
    (action, heads.log_prob_entropy(&logits, action).0)
}

/// Per-episode training statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    /// Mean per-user per-slot reward.
    pub mean_reward: f64,
    pub mean_delay: f64,
    pub drop_rate: f64,
    /// Statistics of the latest update, if one has happened.
    pub policy_loss: Option<f64>,
    pub value_loss: Option<f64>,
    pub entropy: Option<f64>,
    pub updates: usize,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scheme: Scheme,
    pub policy: PolicySet,
    pub critics: Vec<Mlp>,
    pub curve: Vec<CurvePoint>,
    pub audit: ConstraintAudit,
}

#[derive(Debug, Clone)]
struct Learner {
    net: Mlp,
    opt: Optimizer,
    rng: Rng,
}

struct ActorData {
    observations: Array2<f64>,
    actions: Vec<Action>,
    log_probs: Vec<f64>,
    advantages: Vec<f64>,
}

struct CriticData {
    inputs: Array2<f64>,
    old_values: Vec<f64>,
    returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct UpdateStats {
    policy_loss: f64,
    value_loss: f64,
    entropy: f64,
}

fn minibatches(n: usize, size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(size).map(<[usize]>::to_vec).collect()
}

fn update_actor(l: &mut Learner, d: &ActorData, cfg: &TrainConfig, heads: HeadLayout, update: usize) -> Result<(f64, f64)> {
    let (mut loss_sum, mut ent_sum, mut count) = (0.0, 0.0, 0usize);
    for _ in 0..cfg.epochs {
        for batch in minibatches(d.actions.len(), cfg.minibatch, &mut l.rng) {
            let x = d.observations.select(Axis(0), &batch);
            let trace = l.net.forward_trace(x.view());
            let actions: Vec<Action> = batch.iter().map(|&i| d.actions[i]).collect();
            let old: Vec<f64> = batch.iter().map(|&i| d.log_probs[i]).collect();
            let adv: Vec<f64> = batch.iter().map(|&i| d.advantages[i]).collect();
            let (stats, d_logits) = actor_loss_and_grad(
                ActorBatch {
                    logits: trace.output.view(),
                    actions: &actions,
                    old_log_probs: &old,
                    advantages: &adv,
                },
                heads,
                cfg.clip,
                cfg.entropy_coef,
            );
            if !stats.loss.is_finite() {
                return Err(Error::Divergence { what: "actor loss", update });
            }
            let mut grads = l.net.zeros_like();
            l.net.backward(&trace, d_logits.view(), &mut grads);
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            l.opt.step(&mut l.net, &grads);
            loss_sum += stats.loss;
            ent_sum += stats.entropy;
            count += 1;
        }
    }
    if !l.net.is_finite() {
        return Err(Error::Divergence { what: "actor weights", update });
    }
    Ok((loss_sum / count as f64, ent_sum / count as f64))
}

fn update_critic(l: &mut Learner, d: &CriticData, cfg: &TrainConfig, clip: Option<f64>, update: usize) -> Result<f64> {
    let (mut loss_sum, mut count) = (0.0, 0usize);
    for _ in 0..cfg.epochs {
        for batch in minibatches(d.returns.len(), cfg.minibatch, &mut l.rng) {
            let x = d.inputs.select(Axis(0), &batch);
            let trace = l.net.forward_trace(x.view());
            let values: Vec<f64> = trace.output.column(0).to_vec();
            let old: Vec<f64> = batch.iter().map(|&i| d.old_values[i]).collect();
            let ret: Vec<f64> = batch.iter().map(|&i| d.returns[i]).collect();
            let (loss, g) = critic_loss_and_grad(&values, &old, &ret, clip);
            if !loss.is_finite() {
                return Err(Error::Divergence { what: "critic loss", update });
            }
            let d_out = Array2::from_shape_vec((g.len(), 1), g).expect("column");
            let mut grads = l.net.zeros_like();
            l.net.backward(&trace, d_out.view(), &mut grads);
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            l.opt.step(&mut l.net, &grads);
            loss_sum += loss;
            count += 1;
        }
    }
    if !l.net.is_finite() {
        return Err(Error::Divergence { what: "critic weights", update });
    }
    Ok(loss_sum / count as f64)
}

/// PPO trainer state for one run.
struct Trainer<'a> {
    cfg: &'a TrainConfig,
    scheme: Scheme,
    heads: HeadLayout,
    users: usize,
    actors: Vec<Learner>,
    critics: Vec<Learner>,
    /// One per user; holds observation, action, log-probability, and the
    /// value and reward seen by that user's critic.
    buffers: Vec<RolloutBuffer>,
    /// Global states for the centralized critic.
    central: Option<RolloutBuffer>,
    value_clip: Option<f64>,
    updates: usize,
    last: Option<UpdateStats>,
}

impl<'a> Trainer<'a> {
    fn new(env: &Env, cfg: &'a TrainConfig, scheme: Scheme, seeds: &SeedTree) -> Self {
        let layout = env.layout();
        let users = layout.users;
        let width = layout.width();
        let heads = HeadLayout {
            targets: layout.targets,
            powers: layout.powers,
            learn_power: cfg.power_override.is_none(),
        };
        let gain = 2f64.sqrt();
        let sizes = |input: usize, output: usize| {
            let mut s = vec![input];
            s.extend(&cfg.hidden);
            s.push(output);
            s
        };
        let make = |index: u64, sizes: &[usize], out_gain: f64, lr: f64| {
            let net = Mlp::new(sizes, gain, out_gain, &mut seeds.rng(Stream::NetworkInit, index));
            Learner {
                opt: Optimizer::new(cfg.optimizer, lr, &net),
                rng: seeds.rng(Stream::Minibatch, index),
                net,
            }
        };
        let n_actors = if cfg.shared_actor { 1 } else { users };
        let actors = (0..n_actors)
            .map(|i| make(i as u64, &sizes(width, heads.width()), 0.01, cfg.actor_lr))
            .collect();
        let (n_critics, critic_width) = match scheme {
            Scheme::Ippo => (users, width),
            Scheme::Mappo => (1, layout.global_width()),
        };
        let critics = (0..n_critics)
            .map(|i| make(CRITIC_INDEX + i as u64, &sizes(critic_width, 1), 1.0, cfg.critic_lr))
            .collect();
        let use_clip = cfg.value_clip.unwrap_or(scheme.default_value_clip());
        Self {
            cfg,
            scheme,
            heads,
            users,
            actors,
            critics,
            buffers: (0..users).map(|_| RolloutBuffer::new(width, cfg.rollout)).collect(),
            central: (scheme == Scheme::Mappo).then(|| RolloutBuffer::new(critic_width, cfg.rollout)),
            value_clip: use_clip.then_some(cfg.clip),
            updates: 0,
            last: None,
        }
    }

    fn policy(&self) -> PolicySet {
        PolicySet {
            actors: self.actors.iter().map(|l| l.net.clone()).collect(),
            heads: self.heads,
            shared: self.cfg.shared_actor,
            power_override: self.cfg.power_override,
        }
    }

    fn actor_index(&self, user: usize) -> usize {
        if self.cfg.shared_actor {
            0
        } else {
            user
        }
    }

    /// Critic values of the current observations, one per user.
    fn values(&self, observations: &[Vec<f64>]) -> Vec<f64> {
        match self.scheme {
            Scheme::Ippo => observations
                .iter()
                .zip(&self.critics)
                .map(|(o, c)| c.net.forward_one(o)[0])
                .collect(),
            Scheme::Mappo => {
                let v = self.critics[0].net.forward_one(&Env::global_state(observations))[0];
                vec![v; self.users]
            }
        }
    }

    fn is_full(&self) -> bool {
        self.buffers[0].is_full()
    }

    fn update(&mut self, next_observations: &[Vec<f64>]) -> Result<()> {
        let cfg = self.cfg;
        let update = self.updates;
        let last_values = self.values(next_observations);

        let mut critic_data = Vec::with_capacity(self.critics.len());
        let mut advantages = Vec::with_capacity(self.users);
        match &self.central {
            None => {
                for (b, &last) in self.buffers.iter().zip(&last_values) {
                    let (adv, ret) = gae(&b.rewards, &b.values, &b.dones, last, cfg.gamma, cfg.gae_lambda);
                    advantages.push(adv);
                    critic_data.push(CriticData {
                        inputs: b.observation_matrix(),
                        old_values: b.values.clone(),
                        returns: ret,
                    });
                }
            }
            Some(c) => {
                let (adv, ret) = gae(&c.rewards, &c.values, &c.dones, last_values[0], cfg.gamma, cfg.gae_lambda);
                advantages = vec![adv; self.users];
                critic_data.push(CriticData {
                    inputs: c.observation_matrix(),
                    old_values: c.values.clone(),
                    returns: ret,
                });
            }
        }

        let mut actor_data = Vec::with_capacity(self.actors.len());
        for a in 0..self.actors.len() {
            let members: Vec<usize> = (0..self.users).filter(|&m| self.actor_index(m) == a).collect();
            let rows: Vec<Array2<f64>> = members.iter().map(|&m| self.buffers[m].observation_matrix()).collect();
            let views: Vec<_> = rows.iter().map(|r| r.view()).collect();
            let mut adv: Vec<f64> = members.iter().flat_map(|&m| advantages[m].iter().copied()).collect();
            normalize(&mut adv);
            actor_data.push(ActorData {
                observations: ndarray::concatenate(Axis(0), &views).expect("rows"),
                actions: members.iter().flat_map(|&m| self.buffers[m].actions.iter().copied()).collect(),
                log_probs: members.iter().flat_map(|&m| self.buffers[m].log_probs.iter().copied()).collect(),
                advantages: adv,
            });
        }

        let value_clip = self.value_clip;
        let value_losses = par::zip_map_mut(&mut self.critics, &critic_data, |l, d| update_critic(l, d, cfg, value_clip, update));
        let heads = self.heads;
        let actor_stats = par::zip_map_mut(&mut self.actors, &actor_data, |l, d| update_actor(l, d, cfg, heads, update));

        let mut stats = UpdateStats::default();
        for v in value_losses {
            stats.value_loss += v? / self.critics.len() as f64;
        }
        for s in actor_stats {
            let (loss, ent) = s?;
            stats.policy_loss += loss / self.actors.len() as f64;
            stats.entropy += ent / self.actors.len() as f64;
        }
        self.buffers.iter_mut().for_each(RolloutBuffer::clear);
        if let Some(c) = &mut self.central {
            c.clear();
        }
        self.updates += 1;
        self.last = Some(stats);
        Ok(())
    }
}

/// Train on `env` with `scheme`; `seed` drives every random choice of the run.
///
/// The environment mode is taken as given, so the same loop also covers
/// degenerate pairings such as a centralized critic on a single user.
pub fn train(env: &mut Env, scheme: Scheme, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate()?;
    if let Some(p) = cfg.power_override {
        if p >= env.layout().powers {
            return Err(Error::Config(format!("power_override {p} outside the power ladder")));
        }
    }
    let seeds = SeedTree::new(seed);
    let mut trainer = Trainer::new(env, cfg, scheme, &seeds);
    let mut action_rng = seeds.rng(Stream::ActionSampling, 0);
    let users = trainer.users;
    let mut curve = Vec::with_capacity(cfg.episodes);
    let mut audit = ConstraintAudit::default();

    for episode in 0..cfg.episodes {
        let before = env.audit();
        let mut obs = env.reset(seed, episode as u64)?;
        let (mut reward_sum, mut delay_sum, mut drops, mut samples) = (0.0, 0.0, 0usize, 0usize);
        loop {
            let policy_actions: Vec<(Action, f64)> = (0..users)
                .map(|m| {
                    let actor = &trainer.actors[trainer.actor_index(m)].net;
                    sample_action(actor, trainer.heads, cfg.power_override, &obs[m], &mut action_rng)
                })
                .collect();
            let values = trainer.values(&obs);
            let global = trainer.central.as_ref().map(|_| Env::global_state(&obs));
            let actions: Vec<Action> = policy_actions.iter().map(|(a, _)| *a).collect();
            let step = env.step(&actions);

            for m in 0..users {
                let (a, logp) = policy_actions[m];
                trainer.buffers[m].push(&obs[m], a, logp, values[m], step.rewards[m], step.done);
            }
            if let (Some(c), Some(g)) = (&mut trainer.central, &global) {
                c.push(g, Action::default(), 0.0, values[0], step.rewards[0], step.done);
            }
            reward_sum += step.rewards.iter().sum::<f64>();
            delay_sum += step.users.iter().map(|u| u.delay.total).sum::<f64>();
            drops += step.users.iter().filter(|u| u.delay.dropped).count();
            samples += users;

            obs = step.observations;
            if trainer.is_full() {
                trainer.update(&obs)?;
            }
            if step.done {
                break;
            }
        }
        let after = env.audit();
        audit.merge(&ConstraintAudit {
            slots: after.slots - before.slots,
            multi_cpu_offloads: after.multi_cpu_offloads - before.multi_cpu_offloads,
            invalid_powers: after.invalid_powers - before.invalid_powers,
            wrong_cluster_sizes: after.wrong_cluster_sizes - before.wrong_cluster_sizes,
            deadline_overruns: after.deadline_overruns - before.deadline_overruns,
            drops: after.drops - before.drops,
        });
        let n = samples as f64;
        curve.push(CurvePoint {
            episode,
            mean_reward: reward_sum / n,
            mean_delay: delay_sum / n,
            drop_rate: drops as f64 / n,
            policy_loss: trainer.last.map(|s| s.policy_loss),
            value_loss: trainer.last.map(|s| s.value_loss),
            entropy: trainer.last.map(|s| s.entropy),
            updates: trainer.updates,
        });
        if (episode + 1) % 50 == 0 {
            log::info!(
                "{:?} seed {seed}: episode {} mean reward {:.5} mean delay {:.5}",
                scheme,
                episode + 1,
                reward_sum / n,
                delay_sum / n
            );
        }
    }

    Ok(TrainOutcome {
        scheme,
        policy: trainer.policy(),
        critics: trainer.critics.iter().map(|l| l.net.clone()).collect(),
        curve,
        audit,
    })
}

/// Independent PPO on a non-cooperative environment built from `config`.
pub fn train_ippo(config: &NetworkConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    let mut env = Env::new(config.clone(), Mode::NonCooperative, seed)?;
    train(&mut env, Scheme::Ippo, cfg, seed)
}

/// Multi-agent PPO with a centralized critic on a cooperative environment.
pub fn train_mappo(config: &NetworkConfig, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    let mut env = Env::new(config.clone(), Mode::Cooperative, seed)?;
    train(&mut env, Scheme::Mappo, cfg, seed)
}
