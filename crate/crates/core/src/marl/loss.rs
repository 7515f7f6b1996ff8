//! Clipped PPO objectives and their gradients.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::dist::log_softmax;
use crate::env::Action;

/// Split of the actor output into the target head and the power head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub targets: usize,
    pub powers: usize,
    /// When false the power head is ignored (power fixed from outside).
    pub learn_power: bool,
}

impl HeadLayout {
    pub fn width(&self) -> usize {
        self.targets + self.powers
    }

    /// Log-probability of `action` under the logits and the summed entropy
    /// of the learned heads.
    pub fn log_prob_entropy(&self, logits: &[f64], action: Action) -> (f64, f64) {
        let (t, p) = logits.split_at(self.targets);
        let lt = log_softmax(t);
        let mut logp = lt[action.target];
        let mut ent = entropy_of(&lt);
        if self.learn_power {
            let lp = log_softmax(p);
            logp += lp[action.power_idx];
            ent += entropy_of(&lp);
        }
        (logp, ent)
    }
}

fn entropy_of(log_probs: &[f64]) -> f64 {
    -log_probs.iter().map(|l| l.exp() * l).sum::<f64>()
}

/// `min(f A, clip(f, 1 - eps, 1 + eps) A)` for one sample.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Negated batch objective: mean clipped surrogate plus the entropy bonus.
pub fn ppo_actor_loss(ratios: &[f64], advantages: &[f64], clip: f64, entropy_coef: f64, entropies: &[f64]) -> f64 {
    let n = ratios.len() as f64;
    let surrogate: f64 = ratios.iter().zip(advantages).map(|(&f, &a)| clipped_surrogate(f, a, clip)).sum::<f64>() / n;
    let entropy = entropies.iter().sum::<f64>() / n;
    -(surrogate + entropy_coef * entropy)
}

/// Plain squared error, or with `clip` the value-clipped form
/// `max((V - R)^2, (clip(V, V_old +- eps) - R)^2)`; batch mean either way.
pub fn critic_loss(values: &[f64], old_values: &[f64], returns: &[f64], clip: Option<f64>) -> f64 {
    critic_loss_and_grad(values, old_values, returns, clip).0
}

/// Critic loss and its derivative with respect to each value.
pub fn critic_loss_and_grad(values: &[f64], old_values: &[f64], returns: &[f64], clip: Option<f64>) -> (f64, Vec<f64>) {
    let n = values.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(values.len());
    for ((&v, &old), &ret) in values.iter().zip(old_values).zip(returns) {
        let plain = (v - ret).powi(2);
        let (l, g) = match clip {
            None => (plain, 2.0 * (v - ret)),
            Some(eps) => {
                let vc = v.clamp(old - eps, old + eps);
                let clipped = (vc - ret).powi(2);
                if plain >= clipped {
                    (plain, 2.0 * (v - ret))
                } else if vc == v {
                    (clipped, 2.0 * (vc - ret))
                } else {
                    (clipped, 0.0)
                }
            }
        };
        loss += l;
        grad.push(g / n);
    }
    (loss / n, grad)
}

/// Batch of actor samples for one update step.
#[derive(Debug, Clone, Copy)]
pub struct ActorBatch<'a> {
    /// One row of raw head logits per sample.
    pub logits: ArrayView2<'a, f64>,
    pub actions: &'a [Action],
    pub old_log_probs: &'a [f64],
    pub advantages: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActorStats {
    pub loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean of `old_logp - logp`.
    pub approx_kl: f64,
}

/// Actor loss and its derivative with respect to the logits.
pub fn actor_loss_and_grad(batch: ActorBatch<'_>, heads: HeadLayout, clip: f64, entropy_coef: f64) -> (ActorStats, Array2<f64>) {
    let n = batch.actions.len();
    assert_eq!(batch.logits.dim(), (n, heads.width()), "logit batch shape");
    let scale = 1.0 / n as f64;
    let mut grad = Array2::zeros(batch.logits.dim());
    let mut stats = ActorStats::default();
    let (mut ratios, mut entropies) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for (i, row) in batch.logits.rows().into_iter().enumerate() {
        let row = row.to_vec();
        let action = batch.actions[i];
        let (t, p) = row.split_at(heads.targets);
        let mut parts = vec![(log_softmax(t), action.target, 0)];
        if heads.learn_power {
            parts.push((log_softmax(p), action.power_idx, heads.targets));
        }
        let logp: f64 = parts.iter().map(|(l, a, _)| l[*a]).sum();
        let ent: f64 = parts.iter().map(|(l, _, _)| entropy_of(l)).sum();
        let ratio = (logp - batch.old_log_probs[i]).exp();
        let adv = batch.advantages[i];
        let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
        let d_logp = if ratio * adv <= clipped * adv { ratio * adv } else { 0.0 };
        if clipped != ratio {
            stats.clip_fraction += scale;
        }
        stats.approx_kl += scale * (batch.old_log_probs[i] - logp);
        for (lp, a, offset) in &parts {
            let h = entropy_of(lp);
            for (j, &l) in lp.iter().enumerate() {
                let pj = l.exp();
                let onehot = if j == *a { 1.0 } else { 0.0 };
                let d_ent = -pj * (l + h);
                grad[[i, offset + j]] = -scale * (d_logp * (onehot - pj) + entropy_coef * d_ent);
            }
        }
        ratios.push(ratio);
        entropies.push(ent);
    }
    stats.loss = ppo_actor_loss(&ratios, batch.advantages, clip, entropy_coef, &entropies);
    stats.entropy = entropies.iter().sum::<f64>() * scale;
    (stats, grad)
}
