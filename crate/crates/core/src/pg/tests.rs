use super::*;
use crate::dp::{solve, DpConfig};
use crate::logic::{parse_program, parse_query, Program};
use crate::scorer::{FeatureStore, ScorerConfig, ScorerParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_step() -> Program {
    // every choice point has one clause candidate plus False
    parse_program("a :- b. b.").unwrap()
}

fn cfg(dim: usize) -> ScorerConfig {
    ScorerConfig {
        dim,
        init_std: 0.5,
        ..Default::default()
    }
}

#[test]
fn uniform_two_choice_trajectory() {
    let mut p = two_step();
    let q = LabeledQuery::new(parse_query("a", &mut p).unwrap(), true);
    let params = ScorerParams::zeros(&p, cfg(3)).unwrap();
    let st = FeatureStore::new(0);
    let policy = NeuralPolicy::new(&params, &st);
    let env = Env::new(&p, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut found = false;
    for _ in 0..50 {
        let t = sample_episode(&env, &q, 0, &policy, None, &mut rng).unwrap();
        assert!([-1.0, 0.0, 1.0].contains(&t.ret));
        if t.outcome == Outcome::True {
            assert_eq!(t.steps.len(), 2);
            assert!((t.target_logp() - 2.0 * 0.5f64.ln()).abs() < 1e-12);
            assert_eq!(importance_weight(&t, 10.0), 1.0);
            found = true;
        }
    }
    assert!(found);
}

#[test]
fn singleton_mask_gives_zero_behavior_logp() {
    let mut p = two_step();
    let q = LabeledQuery::new(parse_query("a", &mut p).unwrap(), true);
    let params = ScorerParams::new(&p, cfg(3), 1).unwrap();
    let st = FeatureStore::new(0);
    let policy = NeuralPolicy::new(&params, &st);
    let env = Env::new(&p, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let only_clauses = |_: &EnvState, c: &CandidateSet| c.candidates.iter().map(|x| !x.action.is_false()).collect();
    let t = sample_episode(&env, &q, 0, &policy, Some(&only_clauses), &mut rng).unwrap();
    assert_eq!(t.outcome, Outcome::True);
    assert!(t.steps.iter().all(|s| s.behavior_logp == 0.0));
    let w = importance_weight(&t, 10.0);
    assert!((w - t.target_logp().exp()).abs() < 1e-12);

    let none = |_: &EnvState, c: &CandidateSet| vec![false; c.len()];
    let t = sample_episode(&env, &q, 0, &policy, Some(&none), &mut rng).unwrap();
    assert!(t.mask_exhausted);
    assert_eq!(t.outcome, Outcome::False);
}

#[test]
fn importance_weight_ratio_and_clip() {
    let mk = |b: f64, t: f64| Trajectory::<()> {
        query_id: 0,
        label: true,
        steps: vec![Step {
            state: (),
            chosen: 0,
            behavior_logp: b,
            target_logp: t,
        }],
        ret: 1.0,
        outcome: Outcome::True,
        mask_exhausted: false,
    };
    assert!((importance_weight(&mk(0.5f64.ln(), 0.25f64.ln()), 10.0) - 0.5).abs() < 1e-12);
    assert_eq!(importance_weight(&mk(-10.0, 0.0), 10.0), 10.0);
}

#[test]
fn zero_returns_give_zero_update_and_success_is_reinforced() {
    let mut p = parse_program("q(X) :- r(X). q(X) :- s(X). r(a). s(b).").unwrap();
    let q = LabeledQuery::new(parse_query("q(a)", &mut p).unwrap(), true);
    let mut params = ScorerParams::new(&p, cfg(3), 3).unwrap();
    let st = FeatureStore::new(0);
    let env = Env::new(&p, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let batch: Vec<Trajectory> = {
        let policy = NeuralPolicy::new(&params, &st);
        (0..200)
            .map(|_| sample_episode(&env, &q, 0, &policy, None, &mut rng).unwrap())
            .collect()
    };
    let failures: Vec<Trajectory> = batch.iter().filter(|t| t.ret == 0.0).cloned().collect();
    let success = batch.iter().find(|t| t.ret == 1.0).unwrap().clone();
    let rf = Reinforce::new(ReinforceConfig::default());
    let policy = NeuralPolicy::new(&params, &st);
    let (g, _) = rf.gradient(&failures, &policy).unwrap();
    assert!(g.iter().all(|x| *x == 0.0));

    let before = score_logp(&success, &params, &st);
    let mut opt = Optimizer::sgd(0.5);
    let mut rf = Reinforce::new(ReinforceConfig::default());
    let snapshot = params.clone();
    rf.update(
        &[success.clone()],
        &NeuralPolicy::new(&snapshot, &st),
        params.as_mut_slice(),
        &mut opt,
    )
    .unwrap();
    assert!(score_logp(&success, &params, &st) > before);
}

fn score_logp(t: &Trajectory, params: &ScorerParams, st: &FeatureStore) -> f64 {
    let policy = NeuralPolicy::new(params, st);
    t.steps
        .iter()
        .map(|s| policy.distribution(&s.state).unwrap().log_probs[s.chosen])
        .sum()
}

#[test]
fn reinforce_is_unbiased_for_the_exact_gradient() {
    let mut p = parse_program("q(X) :- r(X). q(X) :- s(X). r(a). s(a).").unwrap();
    let q = LabeledQuery::new(parse_query("q(a)", &mut p).unwrap(), true);
    let params = ScorerParams::new(&p, cfg(2), 7).unwrap();
    let st = FeatureStore::new(0);
    let policy = NeuralPolicy::new(&params, &st);
    let table = solve(&q.goal, &p, &policy, &DpConfig::new(6)).unwrap();
    let mut exact = params.zero_grad();
    table.accumulate_gradient(&policy, 1.0, &mut exact).unwrap();

    let env = Env::new(&p, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let mut sum = vec![0.0; params.len()];
    let mut sq = vec![0.0; params.len()];
    for _ in 0..n {
        let t = sample_episode(&env, &q, 0, &policy, None, &mut rng).unwrap();
        if t.ret == 0.0 {
            continue;
        }
        let g = score_function(&t, &policy).unwrap();
        for i in 0..g.len() {
            let x = t.ret * g[i];
            sum[i] += x;
            sq[i] += x * x;
        }
    }
    for i in 0..params.len() {
        let mean = sum[i] / n as f64;
        let var = (sq[i] / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - exact[i]).abs() <= 4.0 * se + 1e-12,
            "component {i}: {mean} vs {}",
            exact[i]
        );
    }
}

#[test]
fn critic_gradient_matches_finite_differences() {
    let mut p = parse_program("q(X) :- r(X). r(a).").unwrap();
    let g = parse_query("q(X), r(X)", &mut p).unwrap();
    let st = FeatureStore::new(0);
    let mut c = Critic::new(&p, cfg(3), 2).unwrap();
    c.readout = vec![0.3, -0.2, 0.5, 0.1];
    let mut grad = vec![0.0; c.len()];
    c.accumulate_grad(&g, 1.0, &st, &mut grad).unwrap();
    let h = 1e-6;
    let n = c.encoder.len();
    for i in 0..c.len() {
        let bump = |c: &mut Critic, d: f64| {
            if i < n {
                c.encoder.as_mut_slice()[i] += d
            } else {
                c.readout[i - n] += d
            }
        };
        bump(&mut c, h);
        let up = c.value(&g, &st).unwrap();
        bump(&mut c, -2.0 * h);
        let down = c.value(&g, &st).unwrap();
        bump(&mut c, h);
        let fd = (up - down) / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "param {i}");
    }
}

#[test]
fn ppo_runs_and_fresh_ratios_are_one() {
    let mut p = parse_program("q(X) :- r(X). q(X) :- s(X). r(a). s(b).").unwrap();
    let queries = vec![
        LabeledQuery::new(parse_query("q(a)", &mut p).unwrap(), true),
        LabeledQuery::new(parse_query("q(b)", &mut p).unwrap(), false),
    ];
    let mut params = ScorerParams::new(&p, cfg(4), 3).unwrap();
    let st = FeatureStore::new(0);
    let mut critic = Critic::new(&p, cfg(4), 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = collect_rollouts(&p, 6, &queries, 8, &NeuralPolicy::new(&params, &st), &mut rng).unwrap();
    let policy = NeuralPolicy::new(&params, &st);
    for t in &batch {
        for s in &t.steps {
            let lp = policy.distribution(&s.state).unwrap().log_probs[s.chosen];
            assert_eq!(lp, s.behavior_logp);
        }
    }
    let cfg = PpoConfig {
        lr: 0.05,
        ..Default::default()
    };
    let mut po = Optimizer::adam(cfg.lr);
    let mut co = Optimizer::adam(cfg.lr);
    let s = ppo_update(&batch, &mut params, &st, &mut critic, &mut po, &mut co, &cfg, &mut rng).unwrap();
    assert!(s.entropy > 0.0);
    assert_eq!(s.epochs_run, cfg.epochs);
}
