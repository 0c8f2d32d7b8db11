//! PPO training and ranking evaluation for knowledge-graph completion.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kg::{
    combine_score, rank_metrics, sample_negatives, CorruptMode, KgDataset, RankMetrics, RankResult, TieBreak, Triple,
};
use crate::dp::{solve, DpConfig, LabeledQuery};
use crate::error::{Error, Result};
use crate::logic::Program;
use crate::optim::Optimizer;
use crate::pg::{collect_rollouts, ppo_update, Critic, PpoConfig, PpoStats};
use crate::scorer::{FeatureStore, NeuralPolicy, ScorerConfig, ScorerParams};
use crate::sld::{CandidateOptions, TransitionModel};

#[derive(Clone, Debug, PartialEq)]
pub struct KgConfig {
    pub scorer: ScorerConfig,
    pub max_depth: usize,
    /// Corruptions ranked against each evaluation query.
    pub negatives: usize,
    /// Labeled-false corruptions per positive training query.
    pub train_negatives: usize,
    pub corrupt: CorruptMode,
    pub iterations: usize,
    pub ppo: PpoConfig,
    pub tie: TieBreak,
    pub prior_weight: f64,
    pub seed: u64,
}

impl Default for KgConfig {
    fn default() -> Self {
        KgConfig {
            scorer: ScorerConfig {
                dim: 16,
                ..Default::default()
            },
            max_depth: 5,
            negatives: 20,
            train_negatives: 1,
            corrupt: CorruptMode::Both,
            iterations: 40,
            ppo: PpoConfig {
                lr: 3e-3,
                ..Default::default()
            },
            tie: TieBreak::Pessimistic,
            prior_weight: 1.0,
            seed: 0,
        }
    }
}

/// Relations that appear in the test split; only these are trained and ranked.
pub fn target_relations(ds: &KgDataset) -> BTreeSet<String> {
    ds.test.iter().chain(&ds.valid).map(|t| t.relation.clone()).collect()
}

/// Positive training triples of the target relations, each followed by
/// `train_negatives` filtered corruptions labeled false.
pub fn training_queries(ds: &KgDataset, cfg: &KgConfig) -> Result<(Vec<Triple>, Vec<LabeledQuery>)> {
    let targets = target_relations(ds);
    let known = ds.known();
    let mut triples = Vec::new();
    let mut queries = Vec::new();
    for (i, t) in ds.train.iter().filter(|t| targets.contains(&t.relation)).enumerate() {
        triples.push(t.clone());
        queries.push(ds.labeled(t, true)?);
        let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        for n in sample_negatives(t, cfg.train_negatives, &ds.entities, cfg.corrupt, &known, seed)? {
            queries.push(ds.labeled(&n, false)?);
            triples.push(n);
        }
    }
    if queries.is_empty() {
        return Err(Error::Validation("no training triples for the target relations".into()));
    }
    Ok((triples, queries))
}

fn dp_config(q: &LabeledQuery, max_depth: usize) -> DpConfig {
    DpConfig {
        candidates: CandidateOptions {
            banned: q.banned.clone(),
            ..CandidateOptions::with_false()
        },
        ..DpConfig::new(max_depth)
    }
}

/// Exact success probability of a labeled query (its banned clauses hidden).
pub fn query_probability(
    program: &Program,
    q: &LabeledQuery,
    model: &dyn TransitionModel,
    max_depth: usize,
) -> Result<f64> {
    Ok(solve(&q.goal, program, model, &dp_config(q, max_depth))?.success_probability())
}

/// Mean exact return `V(q, 1) = p` over the positive queries.
pub fn mean_positive_return(
    program: &Program,
    queries: &[LabeledQuery],
    model: &dyn TransitionModel,
    max_depth: usize,
) -> Result<f64> {
    let pos: Vec<&LabeledQuery> = queries.iter().filter(|q| q.label).collect();
    let mut total = 0.0;
    for q in &pos {
        total += query_probability(program, q, model, max_depth)?;
    }
    Ok(total / pos.len().max(1) as f64)
}

/// Ranks every triple of `split` against `negatives` filtered corruptions.
/// Corruptions are drawn with a seed derived from the query's position, so
/// every scorer sees the same candidates.
pub fn rank_split(
    ds: &KgDataset,
    split: &[Triple],
    cfg: &KgConfig,
    mut score: impl FnMut(&Triple) -> Result<f64>,
) -> Result<Vec<RankResult>> {
    let known = ds.known();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut out = Vec::with_capacity(split.len());
    for (i, t) in split.iter().enumerate() {
        let seed = cfg.seed.wrapping_mul(7_919).wrapping_add(i as u64) ^ 0xace;
        let negs = sample_negatives(t, cfg.negatives, &ds.entities, cfg.corrupt, &known, seed)?;
        let true_score = score(t)?;
        let corrupt: Vec<f64> = negs.iter().map(&mut score).collect::<Result<_>>()?;
        out.push(RankResult::new(t.to_string(), true_score, corrupt, cfg.tie, &mut rng));
    }
    Ok(out)
}

/// Scores triples by their success probability under `model`, optionally
/// combined with per-triple prior scores.
pub fn probability_scorer<'a>(
    ds: &'a KgDataset,
    model: &'a dyn TransitionModel,
    max_depth: usize,
    priors: Option<&'a HashMap<Triple, f64>>,
    prior_weight: f64,
) -> impl FnMut(&Triple) -> Result<f64> + 'a {
    move |t| {
        let q = ds.labeled(t, true)?;
        let p = query_probability(&ds.program, &q, model, max_depth)?;
        Ok(combine_score(p, priors.and_then(|m| m.get(t).copied()), prior_weight))
    }
}

pub fn evaluate_kg(
    ds: &KgDataset,
    split: &[Triple],
    params: &ScorerParams,
    store: &FeatureStore,
    cfg: &KgConfig,
    priors: Option<&HashMap<Triple, f64>>,
) -> Result<(RankMetrics, Vec<RankResult>)> {
    let policy = NeuralPolicy::new(params, store);
    let results = rank_split(
        ds,
        split,
        cfg,
        probability_scorer(ds, &policy, cfg.max_depth, priors, cfg.prior_weight),
    )?;
    Ok((rank_metrics(&results, &[1, 3, 10])?, results))
}

/// Per-iteration record of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct KgIteration {
    pub iteration: usize,
    pub stats: PpoStats,
}

pub struct KgModel {
    pub params: ScorerParams,
    pub critic: Critic,
    pub policy_opt: Optimizer,
    pub critic_opt: Optimizer,
    pub rng: ChaCha8Rng,
}

impl KgModel {
    pub fn new(ds: &KgDataset, cfg: &KgConfig) -> Result<Self> {
        Ok(KgModel {
            params: ScorerParams::new(&ds.program, cfg.scorer.clone(), cfg.seed)?,
            critic: Critic::new(&ds.program, cfg.scorer.clone(), cfg.seed.wrapping_add(1))?,
            policy_opt: Optimizer::adam(cfg.ppo.lr),
            critic_opt: Optimizer::adam(cfg.ppo.lr),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2)),
        })
    }

    /// One PPO iteration: fresh rollouts under the current policy, then the update.
    pub fn iterate(&mut self, ds: &KgDataset, queries: &[LabeledQuery], cfg: &KgConfig) -> Result<PpoStats> {
        let store = FeatureStore::new(0);
        let batch = {
            let policy = NeuralPolicy::new(&self.params, &store);
            collect_rollouts(
                &ds.program,
                cfg.max_depth,
                queries,
                cfg.ppo.rollouts,
                &policy,
                &mut self.rng,
            )?
        };
        ppo_update(
            &batch,
            &mut self.params,
            &store,
            &mut self.critic,
            &mut self.policy_opt,
            &mut self.critic_opt,
            &cfg.ppo,
            &mut self.rng,
        )
    }
}

/// Runs `cfg.iterations` PPO iterations, calling `on_iter` after each.
pub fn train_kg(
    ds: &KgDataset,
    cfg: &KgConfig,
    mut on_iter: impl FnMut(&KgIteration, &KgModel) -> Result<()>,
) -> Result<KgModel> {
    let (_, queries) = training_queries(ds, cfg)?;
    let mut model = KgModel::new(ds, cfg)?;
    for iteration in 0..cfg.iterations {
        let stats = model.iterate(ds, &queries, cfg)?;
        on_iter(&KgIteration { iteration, stats }, &model)?;
    }
    Ok(model)
}

/// Parses a `relation(head, tail)` atom into a triple.
pub fn parse_triple_atom(text: &str) -> Option<Triple> {
    let text = text.trim();
    let (rel, rest) = text.split_once('(')?;
    let args = rest.strip_suffix(')')?;
    let (h, t) = args.split_once(',')?;
    let clean = |s: &str| s.trim().trim_matches('\'').to_string();
    Some(Triple {
        head: clean(h),
        relation: rel.trim().to_string(),
        tail: clean(t),
    })
}

/// Prior scores, one `goal<TAB>score` line each.
pub fn load_priors(path: &Path) -> Result<HashMap<Triple, f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_priors(&text)
}

pub fn parse_priors(text: &str) -> Result<HashMap<Triple, f64>> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Data {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (goal, score) = line.split_once('\t').ok_or_else(|| err("expected goal<TAB>score"))?;
        let t = parse_triple_atom(goal).ok_or_else(|| err("goal must be relation(head, tail)"))?;
        let s: f64 = score.trim().parse().map_err(|_| err("score is not a number"))?;
        out.insert(t, s);
    }
    Ok(out)
}
