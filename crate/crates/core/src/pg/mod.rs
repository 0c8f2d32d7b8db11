//! Learning from sampled derivations: masked off-policy REINFORCE and PPO
//! with a learned critic.

mod ppo;

use std::sync::Arc;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

pub use ppo::{ppo_update, Critic, PpoConfig, PpoStats};

use crate::dp::LabeledQuery;
use crate::error::{Error, Result};
use crate::mdp::{Env, EnvState};
use crate::optim::{norm, Optimizer};
use crate::scorer::NeuralPolicy;
use crate::sld::{CandidateOptions, CandidateSet, Outcome};

/// Default clip for importance weights.
pub const DEFAULT_MAX_WEIGHT: f64 = 10.0;

/// A policy over a finite action set per state, with log-probability gradients.
pub trait StochasticPolicy<S> {
    fn log_probs(&self, state: &S) -> Result<Vec<f64>>;
    /// Adds `weight · ∇ log π(chosen | state)` to `grad`; returns the log-probability.
    fn accumulate_logprob_grad(&self, state: &S, chosen: usize, weight: f64, grad: &mut [f64]) -> Result<f64>;
    fn param_len(&self) -> usize;
}

impl StochasticPolicy<Arc<CandidateSet>> for NeuralPolicy<'_> {
    fn log_probs(&self, state: &Arc<CandidateSet>) -> Result<Vec<f64>> {
        Ok(self.distribution(state)?.log_probs)
    }

    fn accumulate_logprob_grad(
        &self,
        state: &Arc<CandidateSet>,
        chosen: usize,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        NeuralPolicy::accumulate_logprob_grad(self, state, chosen, weight, grad)
    }

    fn param_len(&self) -> usize {
        self.params.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step<S> {
    pub state: S,
    pub chosen: usize,
    /// Log-probability under the distribution the action was sampled from.
    pub behavior_logp: f64,
    /// Log-probability under the unmasked policy at collection time.
    pub target_logp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S = Arc<CandidateSet>> {
    pub query_id: usize,
    pub label: bool,
    pub steps: Vec<Step<S>>,
    pub ret: f64,
    pub outcome: Outcome,
    /// The mask ruled out every action at some step.
    pub mask_exhausted: bool,
}

impl<S> Trajectory<S> {
    pub fn behavior_logp(&self) -> f64 {
        self.steps.iter().map(|s| s.behavior_logp).sum()
    }

    pub fn target_logp(&self) -> f64 {
        self.steps.iter().map(|s| s.target_logp).sum()
    }
}

/// Restricts sampling to a subset of the legal actions.
pub trait ActionMask {
    fn allowed(&self, state: &EnvState, cands: &CandidateSet) -> Vec<bool>;
}

impl<F: Fn(&EnvState, &CandidateSet) -> Vec<bool>> ActionMask for F {
    fn allowed(&self, state: &EnvState, cands: &CandidateSet) -> Vec<bool> {
        self(state, cands)
    }
}

/// Samples an index from log-probabilities restricted to `allowed`; returns
/// the index and its renormalized log-probability.
pub fn sample_masked<R: Rng>(log_probs: &[f64], allowed: Option<&[bool]>, rng: &mut R) -> Option<(usize, f64)> {
    let weights: Vec<f64> = log_probs
        .iter()
        .enumerate()
        .map(|(k, l)| if allowed.map_or(true, |m| m[k]) { l.exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let k = if weights.iter().filter(|w| **w > 0.0).count() == 1 {
        weights.iter().position(|w| *w > 0.0).unwrap()
    } else {
        WeightedIndex::new(&weights).ok()?.sample(rng)
    };
    let logp = if allowed.is_some() {
        (weights[k] / total).ln()
    } else {
        log_probs[k]
    };
    Some((k, logp))
}

/// Rolls out one episode from `query` under `policy`, optionally restricted by `mask`.
pub fn sample_episode<R: Rng>(
    env: &Env<'_>,
    query: &LabeledQuery,
    query_id: usize,
    policy: &NeuralPolicy<'_>,
    mask: Option<&dyn ActionMask>,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut s = env.reset(&query.goal, query.label, query_id)?;
    let mut steps = Vec::new();
    let mut mask_exhausted = false;
    loop {
        let cands = Arc::new(env.legal_actions(&s));
        let dist = policy.distribution(&cands)?;
        let allowed = mask.filter(|_| !cands.forced).map(|m| m.allowed(&s, &cands));
        let (k, behavior) = match sample_masked(&dist.log_probs, allowed.as_deref(), rng) {
            Some(x) => x,
            None => {
                mask_exhausted = true;
                let k = cands
                    .candidates
                    .iter()
                    .position(|c| c.action.is_false())
                    .ok_or_else(|| Error::IllegalAction("mask removed every action of a forced step".into()))?;
                (k, 0.0)
            }
        };
        let r = env.step_index(&s, &cands, k)?;
        steps.push(Step {
            state: cands,
            chosen: k,
            behavior_logp: behavior,
            target_logp: dist.log_probs[k],
        });
        if r.done {
            return Ok(Trajectory {
                query_id,
                label: query.label,
                steps,
                ret: r.reward,
                outcome: r.outcome.expect("done steps carry an outcome"),
                mask_exhausted,
            });
        }
        s = r.next_state;
    }
}

/// `rollouts` episodes per query, in query order.
pub fn collect_rollouts<R: Rng>(
    program: &crate::logic::Program,
    max_depth: usize,
    queries: &[LabeledQuery],
    rollouts: usize,
    policy: &NeuralPolicy<'_>,
    rng: &mut R,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(queries.len() * rollouts);
    for (i, q) in queries.iter().enumerate() {
        let env = Env::with_options(
            program,
            max_depth,
            CandidateOptions {
                banned: q.banned.clone(),
                ..CandidateOptions::with_false()
            },
        );
        for _ in 0..rollouts {
            out.push(sample_episode(&env, q, i, policy, None, rng)?);
        }
    }
    Ok(out)
}

/// `exp(Σ target - Σ behavior)` clipped to `[0, w_max]`.
pub fn importance_weight<S>(t: &Trajectory<S>, w_max: f64) -> f64 {
    (t.target_logp() - t.behavior_logp()).exp().clamp(0.0, w_max)
}

/// `Σ_steps ∇ log π(chosen | state)` for one trajectory.
pub fn score_function<S, P: StochasticPolicy<S> + ?Sized>(t: &Trajectory<S>, policy: &P) -> Result<Vec<f64>> {
    let mut g = vec![0.0; policy.param_len()];
    for s in &t.steps {
        policy.accumulate_logprob_grad(&s.state, s.chosen, 1.0, &mut g)?;
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReinforceConfig {
    pub max_weight: f64,
    /// Subtract an exponential moving average of returns.
    pub baseline: bool,
    pub baseline_decay: f64,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        ReinforceConfig {
            max_weight: DEFAULT_MAX_WEIGHT,
            baseline: false,
            baseline_decay: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReinforceStats {
    pub mean_return: f64,
    pub mean_weight: f64,
    pub grad_norm: f64,
}

/// Importance-weighted REINFORCE.
#[derive(Clone, Debug)]
pub struct Reinforce {
    pub config: ReinforceConfig,
    baseline: f64,
}

impl Reinforce {
    pub fn new(config: ReinforceConfig) -> Self {
        Reinforce { config, baseline: 0.0 }
    }

    /// Batch-mean gradient estimate `(1/B) Σ_t w(t) (R(t) - b) Σ ∇ log π`.
    pub fn gradient<S, P: StochasticPolicy<S> + ?Sized>(
        &self,
        batch: &[Trajectory<S>],
        policy: &P,
    ) -> Result<(Vec<f64>, ReinforceStats)> {
        if batch.is_empty() {
            return Err(Error::Domain("empty trajectory batch".into()));
        }
        let b = if self.config.baseline { self.baseline } else { 0.0 };
        let n = batch.len() as f64;
        let mut grad = vec![0.0; policy.param_len()];
        let mut wsum = 0.0;
        for t in batch {
            let w = importance_weight(t, self.config.max_weight);
            wsum += w;
            let coef = w * (t.ret - b) / n;
            if coef == 0.0 {
                continue;
            }
            for s in &t.steps {
                policy.accumulate_logprob_grad(&s.state, s.chosen, coef, &mut grad)?;
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("policy gradient component {i}")));
        }
        let stats = ReinforceStats {
            mean_return: batch.iter().map(|t| t.ret).sum::<f64>() / n,
            mean_weight: wsum / n,
            grad_norm: norm(&grad),
        };
        Ok((grad, stats))
    }

    /// Computes the gradient and takes one ascent step on `params`.
    pub fn update<S, P: StochasticPolicy<S> + ?Sized>(
        &mut self,
        batch: &[Trajectory<S>],
        policy: &P,
        params: &mut [f64],
        opt: &mut Optimizer,
    ) -> Result<ReinforceStats> {
        let (grad, stats) = self.gradient(batch, policy)?;
        opt.ascend(params, &grad)?;
        if self.config.baseline {
            let d = self.config.baseline_decay;
            self.baseline = d * self.baseline + (1.0 - d) * stats.mean_return;
        }
        Ok(stats)
    }
}

/// Mean return per label, success rate over all trajectories.
pub fn return_summary<S>(batch: &[Trajectory<S>]) -> (f64, f64, f64) {
    let mean = |label: bool| {
        let v: Vec<f64> = batch.iter().filter(|t| t.label == label).map(|t| t.ret).collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let success = batch.iter().filter(|t| t.outcome == Outcome::True).count() as f64 / batch.len().max(1) as f64;
    (mean(true), mean(false), success)
}

#[cfg(test)]
mod tests;
