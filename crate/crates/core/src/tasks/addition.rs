//! Multi-digit addition over perceived digits.
//!
//! Each digit is observed only through a feature vector (a noisy copy of a
//! per-class mean). A classifier turns a feature vector into a distribution
//! over digits: the scorer's feature projection is compared against the
//! embedding of each integer constant `0..9`. Supervision is the sum only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::mask::{column_total, digit_mask};
use crate::dp::{mnist_sum_probability, mnist_sum_probability_grad, DigitDist};
use crate::error::{Error, Result};
use crate::logic::{parse_program, PayloadId, Program, Term};
use crate::optim::Optimizer;
use crate::pg::{importance_weight, sample_masked, Reinforce, ReinforceConfig, Step, StochasticPolicy, Trajectory};
use crate::scorer::{log_softmax, FeatureStore, ScorerParams};
use crate::sld::Outcome;

/// The digit-wise addition program (lists hold the least significant digit first).
pub const ADDITION_PROGRAM: &str = "\
mnist_addition([], [], [], 0).
mnist_addition([], [], [1], 1).
mnist_addition([HN1|TN1], [HN2|TN2], [HSUM|TSUM], CarryIn) :-
    Sum is HN1 + HN2 + CarryIn,
    HSUM is Sum mod 10,
    CarryOut is Sum // 10,
    mnist_addition(TN1, TN2, TSUM, CarryOut).
digit(0). digit(1). digit(2). digit(3). digit(4).
digit(5). digit(6). digit(7). digit(8). digit(9).
";

/// The addition program; its symbol table holds every digit constant.
pub fn addition_program() -> Program {
    parse_program(ADDITION_PROGRAM).expect("built-in program parses")
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionSample {
    pub a: Vec<PayloadId>,
    pub b: Vec<PayloadId>,
    pub target: u64,
    /// Hidden digits, most significant first; for diagnostics only.
    pub digits_a: Vec<u8>,
    pub digits_b: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionDataset {
    pub samples: Vec<AdditionSample>,
    pub store: FeatureStore,
    pub class_means: Vec<Vec<f64>>,
    pub seq_len: usize,
}

impl AdditionDataset {
    /// Moves the last `n` samples into a second dataset sharing the feature store.
    pub fn split_off(&mut self, n: usize) -> Vec<AdditionSample> {
        let at = self.samples.len().saturating_sub(n);
        self.samples.split_off(at)
    }
}

pub fn number(digits: &[u8]) -> u64 {
    digits.iter().fold(0, |acc, d| acc * 10 + *d as u64)
}

/// `count` samples of two `n`-digit numbers; every image is a fresh payload.
pub fn generate_addition_dataset(
    count: usize,
    n: usize,
    feature_dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<AdditionDataset> {
    if n == 0 || n > 18 || feature_dim == 0 {
        return Err(Error::Config(
            "sequence length must be in 1..=18 and feature dim positive".into(),
        ));
    }
    if !(sigma >= 0.0) {
        return Err(Error::Config(format!("noise level {sigma} is negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let class_means: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..feature_dim).map(|_| unit.sample(&mut rng)).collect())
        .collect();
    let mut store = FeatureStore::new(feature_dim);
    let mut next = 0u32;
    let mut image = |digit: u8, rng: &mut ChaCha8Rng, store: &mut FeatureStore| {
        let v = class_means[digit as usize]
            .iter()
            .map(|m| m + sigma * unit.sample(rng))
            .collect();
        let id = PayloadId(next);
        next += 1;
        store.insert(id, v).expect("dimension matches");
        id
    };
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let digits_a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..10)).collect();
        let digits_b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..10)).collect();
        let a = digits_a.iter().map(|d| image(*d, &mut rng, &mut store)).collect();
        let b = digits_b.iter().map(|d| image(*d, &mut rng, &mut store)).collect();
        samples.push(AdditionSample {
            a,
            b,
            target: number(&digits_a) + number(&digits_b),
            digits_a,
            digits_b,
        });
    }
    Ok(AdditionDataset {
        samples,
        store,
        class_means: class_means.clone(),
        seq_len: n,
    })
}

/// Digit distributions from feature vectors.
#[derive(Clone, Copy, Debug)]
pub struct DigitClassifier<'a> {
    pub params: &'a ScorerParams,
    pub store: &'a FeatureStore,
}

impl<'a> DigitClassifier<'a> {
    pub fn new(params: &'a ScorerParams, store: &'a FeatureStore) -> Self {
        DigitClassifier { params, store }
    }

    fn logits(&self, x: PayloadId) -> Result<(Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
        let ex = self.params.embed_term(&Term::Payload(x), self.store)?;
        let digits: Vec<Vec<f64>> = (0..10)
            .map(|k| self.params.embed_term(&Term::Int(k), self.store))
            .collect::<Result<_>>()?;
        let logits = digits
            .iter()
            .map(|e| e.iter().zip(&ex).map(|(a, b)| a * b).sum())
            .collect();
        Ok((logits, digits, ex))
    }

    pub fn log_distribution(&self, x: PayloadId) -> Result<Vec<f64>> {
        Ok(log_softmax(&self.logits(x)?.0))
    }

    pub fn distribution(&self, x: PayloadId) -> Result<DigitDist> {
        let lp = self.log_distribution(x)?;
        let mut d = [0.0; 10];
        for (o, l) in d.iter_mut().zip(lp) {
            *o = l.exp();
        }
        Ok(d)
    }

    pub fn predict(&self, x: PayloadId) -> Result<u8> {
        let d = self.distribution(x)?;
        Ok(argmax(&d) as u8)
    }

    /// Adds `Σ_k logit_grads[k] · ∂logit_k/∂λ` to `grad`.
    pub fn backprop_logits(&self, x: PayloadId, logit_grads: &[f64], grad: &mut [f64]) -> Result<()> {
        let (_, digits, ex) = self.logits(x)?;
        let mut gx = vec![0.0; ex.len()];
        for (k, &g) in logit_grads.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            for (gi, e) in gx.iter_mut().zip(&digits[k]) {
                *gi += g * e;
            }
            let gk: Vec<f64> = ex.iter().map(|v| g * v).collect();
            self.params.backprop_term(&Term::Int(k as i64), &gk, self.store, grad)?;
        }
        self.params.backprop_term(&Term::Payload(x), &gx, self.store, grad)
    }

    /// Adds `Σ_k prob_grads[k] · ∂p_k/∂λ` to `grad`.
    pub fn backprop_probs(&self, x: PayloadId, prob_grads: &[f64], grad: &mut [f64]) -> Result<()> {
        let p = self.distribution(x)?;
        let mean: f64 = p.iter().zip(prob_grads).map(|(a, b)| a * b).sum();
        let lg: Vec<f64> = p.iter().zip(prob_grads).map(|(pk, gk)| pk * (gk - mean)).collect();
        self.backprop_logits(x, &lg, grad)
    }
}

impl StochasticPolicy<PayloadId> for DigitClassifier<'_> {
    fn log_probs(&self, state: &PayloadId) -> Result<Vec<f64>> {
        self.log_distribution(*state)
    }

    fn accumulate_logprob_grad(&self, state: &PayloadId, chosen: usize, weight: f64, grad: &mut [f64]) -> Result<f64> {
        let lp = self.log_distribution(*state)?;
        if weight != 0.0 {
            let lg: Vec<f64> = lp
                .iter()
                .enumerate()
                .map(|(k, l)| weight * (if k == chosen { 1.0 } else { 0.0 } - l.exp()))
                .collect();
            self.backprop_logits(*state, &lg, grad)?;
        }
        Ok(lp[chosen])
    }

    fn param_len(&self) -> usize {
        self.params.len()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Scorer configuration for the digit classifier.
pub fn classifier_config(dim: usize, feature_dim: usize) -> crate::scorer::ScorerConfig {
    crate::scorer::ScorerConfig {
        dim,
        feature_dim,
        ..Default::default()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for AdditionTrainConfig {
    fn default() -> Self {
        AdditionTrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 3e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionEpoch {
    pub epoch: usize,
    /// Mean probability of the observed sums (exact mode) or mean return (sampling mode).
    pub objective: f64,
    pub mean_weight: f64,
}

fn dists(clf: &DigitClassifier<'_>, ids: &[PayloadId]) -> Result<Vec<DigitDist>> {
    ids.iter().map(|x| clf.distribution(*x)).collect()
}

/// Exact sum probability of one sample and its gradient, accumulated with `weight`.
pub fn addition_probability_grad(
    clf: &DigitClassifier<'_>,
    s: &AdditionSample,
    weight: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let da = dists(clf, &s.a)?;
    let db = dists(clf, &s.b)?;
    let (p, ga, gb) = mnist_sum_probability_grad(&da, &db, s.target)?;
    for (x, g) in s.a.iter().zip(&ga).chain(s.b.iter().zip(&gb)) {
        let g: Vec<f64> = g.iter().map(|v| weight * v).collect();
        clf.backprop_probs(*x, &g, grad)?;
    }
    Ok(p)
}

/// One pass over `samples` in shuffled minibatches, ascending `Σ p(target)`.
pub fn addition_dp_epoch(
    samples: &[AdditionSample],
    store: &FeatureStore,
    params: &mut ScorerParams,
    opt: &mut Optimizer,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for chunk in order.chunks(batch_size.max(1)) {
        let mut grad = params.zero_grad();
        {
            let clf = DigitClassifier::new(params, store);
            let w = 1.0 / chunk.len() as f64;
            for &i in chunk {
                total += addition_probability_grad(&clf, &samples[i], w, &mut grad)?;
            }
        }
        opt.ascend(params.as_mut_slice(), &grad)?;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("sum probability".into()));
    }
    Ok(total / samples.len().max(1) as f64)
}

/// Samples both numbers digit by digit (most significant first) from the
/// classifier restricted to digits that keep the target reachable.
pub fn sample_masked_digits<R: Rng>(
    clf: &DigitClassifier<'_>,
    s: &AdditionSample,
    rng: &mut R,
) -> Result<Trajectory<PayloadId>> {
    let n = s.a.len();
    let (mut pa, mut pb) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut steps = Vec::with_capacity(2 * n);
    for pos in 0..n {
        let t = column_total(s.target, &pa, &pb, n)?;
        let mut prev = 0u8;
        for (curr, x) in [(0u8, s.a[pos]), (1u8, s.b[pos])] {
            let mask = digit_mask(pos, n, t, s.target, curr, prev)?;
            let lp = clf.log_distribution(x)?;
            let Some((k, behavior)) = sample_masked(&lp, Some(&mask), rng) else {
                return Err(Error::Domain(format!(
                    "target {} unreachable at position {pos}",
                    s.target
                )));
            };
            steps.push(Step {
                state: x,
                chosen: k,
                behavior_logp: behavior,
                target_logp: lp[k],
            });
            if curr == 0 {
                pa.push(k as u8);
                prev = k as u8;
            } else {
                pb.push(k as u8);
            }
        }
    }
    let ok = number(&pa) + number(&pb) == s.target;
    Ok(Trajectory {
        query_id: 0,
        label: true,
        steps,
        ret: if ok { 1.0 } else { 0.0 },
        outcome: if ok { Outcome::True } else { Outcome::False },
        mask_exhausted: false,
    })
}

/// One pass of masked off-policy REINFORCE in minibatches.
#[allow(clippy::too_many_arguments)]
pub fn addition_pg_epoch(
    samples: &[AdditionSample],
    store: &FeatureStore,
    params: &mut ScorerParams,
    opt: &mut Optimizer,
    reinforce: &mut Reinforce,
    batch_size: usize,
    rollouts: usize,
    rng: &mut ChaCha8Rng,
) -> Result<AdditionEpoch> {
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    let (mut ret, mut wsum, mut count) = (0.0, 0.0, 0usize);
    for chunk in order.chunks(batch_size.max(1)) {
        let snapshot = params.clone();
        let clf = DigitClassifier::new(&snapshot, store);
        let mut batch = Vec::with_capacity(chunk.len() * rollouts);
        for &i in chunk {
            for _ in 0..rollouts.max(1) {
                batch.push(sample_masked_digits(&clf, &samples[i], rng)?);
            }
        }
        for t in &batch {
            ret += t.ret;
            wsum += importance_weight(t, reinforce.config.max_weight);
            count += 1;
        }
        reinforce.update(&batch, &clf, params.as_mut_slice(), opt)?;
    }
    Ok(AdditionEpoch {
        epoch: 0,
        objective: ret / count.max(1) as f64,
        mean_weight: wsum / count.max(1) as f64,
    })
}

pub fn default_reinforce() -> Reinforce {
    Reinforce::new(ReinforceConfig::default())
}

/// Most probable target sum. Exhaustive over all sums for short numbers,
/// otherwise the sum of the per-digit argmax readings.
pub fn predict_sum(clf: &DigitClassifier<'_>, s: &AdditionSample) -> Result<u64> {
    let n = s.a.len();
    let da = dists(clf, &s.a)?;
    let db = dists(clf, &s.b)?;
    if n <= 3 {
        let max = 2 * (10u64.pow(n as u32) - 1);
        let mut best = (0u64, f64::NEG_INFINITY);
        for t in 0..=max {
            let p = mnist_sum_probability(&da, &db, t)?;
            if p > best.1 {
                best = (t, p);
            }
        }
        Ok(best.0)
    } else {
        let read = |d: &[DigitDist]| d.iter().fold(0u64, |acc, x| acc * 10 + argmax(x) as u64);
        Ok(read(&da) + read(&db))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditionMetrics {
    pub sum_accuracy: f64,
    pub digit_accuracy: f64,
    pub samples: usize,
}

pub fn evaluate_addition(
    params: &ScorerParams,
    store: &FeatureStore,
    samples: &[AdditionSample],
) -> Result<AdditionMetrics> {
    let clf = DigitClassifier::new(params, store);
    let (mut sums, mut digits, mut total_digits) = (0usize, 0usize, 0usize);
    for s in samples {
        if predict_sum(&clf, s)? == s.target {
            sums += 1;
        }
        for (x, d) in s.a.iter().zip(&s.digits_a).chain(s.b.iter().zip(&s.digits_b)) {
            total_digits += 1;
            if clf.predict(*x)? == *d {
                digits += 1;
            }
        }
    }
    Ok(AdditionMetrics {
        sum_accuracy: sums as f64 / samples.len().max(1) as f64,
        digit_accuracy: digits as f64 / total_digits.max(1) as f64,
        samples: samples.len(),
    })
}

/// Fresh classifier parameters for the addition program.
pub fn init_classifier(program: &Program, dim: usize, feature_dim: usize, seed: u64) -> Result<ScorerParams> {
    ScorerParams::new(program, classifier_config(dim, feature_dim), seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_examples() {
        let d = generate_addition_dataset(50, 1, 4, 0.0, 3).unwrap();
        let mut by_digit: Vec<Option<&[f64]>> = vec![None; 10];
        for s in &d.samples {
            for (x, dg) in s.a.iter().zip(&s.digits_a) {
                let v = d.store.get(*x).unwrap();
                match by_digit[*dg as usize] {
                    Some(prev) => assert_eq!(prev, v),
                    None => by_digit[*dg as usize] = Some(v),
                }
            }
            assert_eq!(s.target, number(&s.digits_a) + number(&s.digits_b));
        }
        assert_eq!(number(&[1, 2]) + number(&[3, 4]), 46);
        assert_eq!(
            generate_addition_dataset(5, 2, 3, 0.5, 9).unwrap(),
            generate_addition_dataset(5, 2, 3, 0.5, 9).unwrap()
        );
    }

    #[test]
    fn probability_gradient_matches_finite_differences() {
        let d = generate_addition_dataset(3, 2, 3, 0.3, 1).unwrap();
        let prog = addition_program();
        let mut params = ScorerParams::new(
            &prog,
            crate::scorer::ScorerConfig {
                dim: 3,
                feature_dim: 3,
                init_std: 0.8,
                ..Default::default()
            },
            4,
        )
        .unwrap();
        let s = &d.samples[0];
        let mut grad = params.zero_grad();
        addition_probability_grad(&DigitClassifier::new(&params, &d.store), s, 1.0, &mut grad).unwrap();
        let h = 1e-6;
        let mut nonzero = 0;
        for i in 0..params.len() {
            let orig = params.as_slice()[i];
            let f = |p: &ScorerParams| {
                let c = DigitClassifier::new(p, &d.store);
                mnist_sum_probability(&dists(&c, &s.a).unwrap(), &dists(&c, &s.b).unwrap(), s.target).unwrap()
            };
            params.as_mut_slice()[i] = orig + h;
            let up = f(&params);
            params.as_mut_slice()[i] = orig - h;
            let down = f(&params);
            params.as_mut_slice()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                (fd - grad[i]).abs() <= 1e-7 * (1.0 + fd.abs()),
                "param {i}: {} vs {fd}",
                grad[i]
            );
            if grad[i] != 0.0 {
                nonzero += 1;
            }
        }
        assert!(nonzero > 10);
    }

    #[test]
    fn masked_rollouts_hit_the_target() {
        let d = generate_addition_dataset(40, 3, 4, 0.5, 2).unwrap();
        let prog = addition_program();
        let params = init_classifier(&prog, 4, 4, 0).unwrap();
        let clf = DigitClassifier::new(&params, &d.store);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for s in &d.samples {
            for _ in 0..5 {
                let t = sample_masked_digits(&clf, s, &mut rng).unwrap();
                assert_eq!(t.ret, 1.0);
            }
        }
    }
}
