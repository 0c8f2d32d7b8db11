use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::Trajectory;
use crate::error::{Error, Result};
use crate::logic::{Goal, Program};
use crate::optim::Optimizer;
use crate::scorer::{FeatureStore, NeuralPolicy, ScorerConfig, ScorerParams};
use crate::sld::CandidateSet;

#[derive(Clone, Debug, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub entropy_coef: f64,
    pub critic_coef: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    /// Episodes per query per iteration.
    pub rollouts: usize,
    /// Stop the inner epochs once the approximate KL exceeds this.
    pub kl_stop: Option<f64>,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            clip: 0.2,
            entropy_coef: 0.2,
            critic_coef: 0.5,
            epochs: 4,
            minibatch: 64,
            lr: 3e-4,
            rollouts: 4,
            kl_stop: None,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(Error::Config(format!("clip range {} outside (0, 1)", self.clip)));
        }
        if self.entropy_coef < 0.0 || self.critic_coef < 0.0 || self.lr <= 0.0 {
            return Err(Error::Config("PPO coefficients must be non-negative".into()));
        }
        if self.epochs == 0 || self.minibatch == 0 || self.rollouts == 0 {
            return Err(Error::Config(
                "PPO epochs, minibatch and rollouts must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// State-value estimate: an affine readout of a separately parameterized
/// goal embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub encoder: ScorerParams,
    pub readout: Vec<f64>,
}

impl Critic {
    pub fn new(program: &Program, config: ScorerConfig, seed: u64) -> Result<Self> {
        let encoder = ScorerParams::new(program, config, seed)?;
        let readout = vec![0.0; encoder.dim() + 1];
        Ok(Critic { encoder, readout })
    }

    /// Length of the flattened parameter vector (encoder, then readout).
    pub fn len(&self) -> usize {
        self.encoder.len() + self.readout.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, goal: &Goal, store: &FeatureStore) -> Result<f64> {
        let e = self.encoder.embed_goal(goal, store)?;
        let d = e.len();
        Ok(self.readout[d] + e.iter().zip(&self.readout).map(|(x, w)| x * w).sum::<f64>())
    }

    /// Adds `weight · ∇ value(goal)` to the flattened `grad`.
    pub fn accumulate_grad(&self, goal: &Goal, weight: f64, store: &FeatureStore, grad: &mut [f64]) -> Result<()> {
        let e = self.encoder.embed_goal(goal, store)?;
        let d = e.len();
        let n = self.encoder.len();
        for i in 0..d {
            grad[n + i] += weight * e[i];
        }
        grad[n + d] += weight;
        let g: Vec<f64> = self.readout[..d].iter().map(|w| weight * w).collect();
        self.encoder.backprop_goal(goal, &g, store, &mut grad[..n])
    }

    fn ascend(&mut self, opt: &mut Optimizer, grad: &[f64]) -> Result<()> {
        let mut flat: Vec<f64> = self.encoder.as_slice().iter().chain(&self.readout).copied().collect();
        opt.ascend(&mut flat, grad)?;
        let n = self.encoder.len();
        self.encoder.as_mut_slice().copy_from_slice(&flat[..n]);
        self.readout.copy_from_slice(&flat[n..]);
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub mean_return_pos: f64,
    pub mean_return_neg: f64,
    pub success_rate: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub critic_loss: f64,
    pub approx_kl: f64,
    pub epochs_run: usize,
}

struct Sample {
    cands: Arc<CandidateSet>,
    chosen: usize,
    behavior_logp: f64,
    ret: f64,
    adv: f64,
}

/// Clipped-surrogate policy update plus squared-error critic regression on a
/// batch collected under the current parameters.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<R: Rng>(
    batch: &[Trajectory],
    params: &mut ScorerParams,
    store: &FeatureStore,
    critic: &mut Critic,
    policy_opt: &mut Optimizer,
    critic_opt: &mut Optimizer,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<PpoStats> {
    cfg.validate()?;
    if batch.is_empty() {
        return Err(Error::Domain("empty trajectory batch".into()));
    }
    let (pos, neg, success) = super::return_summary(batch);
    let mut samples = Vec::new();
    for t in batch {
        for s in &t.steps {
            if s.state.forced {
                continue;
            }
            let v = critic.value(&s.state.goal, store)?;
            samples.push(Sample {
                cands: s.state.clone(),
                chosen: s.chosen,
                behavior_logp: s.behavior_logp,
                ret: t.ret,
                adv: t.ret - v,
            });
        }
    }
    let mut stats = PpoStats {
        mean_return_pos: pos,
        mean_return_neg: neg,
        success_rate: success,
        ..Default::default()
    };
    if samples.is_empty() {
        return Ok(stats);
    }
    if samples.len() >= 8 {
        let n = samples.len() as f64;
        let mean = samples.iter().map(|s| s.adv).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.adv - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt().max(1e-8);
        for s in &mut samples {
            s.adv = (s.adv - mean) / sd;
        }
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let (mut clipped, mut seen, mut ent_sum, mut closs_sum, mut kl_sum) = (0usize, 0usize, 0.0, 0.0, 0.0);
    'epochs: for _ in 0..cfg.epochs {
        stats.epochs_run += 1;
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch) {
            let m = chunk.len() as f64;
            let mut pgrad = params.zero_grad();
            let mut cgrad = vec![0.0; critic.len()];
            let mut kl = 0.0;
            {
                let policy = NeuralPolicy::new(params, store);
                for &i in chunk {
                    let s = &samples[i];
                    let dist = policy.distribution(&s.cands)?;
                    let logp = dist.log_probs[s.chosen];
                    let ratio = (logp - s.behavior_logp).exp();
                    kl += s.behavior_logp - logp;
                    let active = if s.adv >= 0.0 {
                        ratio <= 1.0 + cfg.clip
                    } else {
                        ratio >= 1.0 - cfg.clip
                    };
                    if (ratio - 1.0).abs() > cfg.clip {
                        clipped += 1;
                    }
                    if active && s.adv != 0.0 {
                        policy.accumulate_logprob_grad(&s.cands, s.chosen, s.adv * ratio / m, &mut pgrad)?;
                    }
                    ent_sum += policy.accumulate_entropy_grad(&s.cands, cfg.entropy_coef / m, &mut pgrad)?;
                    let v = critic.value(&s.cands.goal, store)?;
                    closs_sum += (v - s.ret).powi(2);
                    critic.accumulate_grad(
                        &s.cands.goal,
                        -2.0 * cfg.critic_coef * (v - s.ret) / m,
                        store,
                        &mut cgrad,
                    )?;
                    seen += 1;
                }
            }
            policy_opt.ascend(params.as_mut_slice(), &pgrad)?;
            critic.ascend(critic_opt, &cgrad)?;
            kl_sum += kl;
            if let Some(limit) = cfg.kl_stop {
                if kl / m > limit {
                    break 'epochs;
                }
            }
        }
    }
    let n = seen.max(1) as f64;
    stats.clip_fraction = clipped as f64 / n;
    stats.entropy = ent_sum / n;
    stats.critic_loss = closs_sum / n;
    stats.approx_kl = kl_sum / n;
    Ok(stats)
}
