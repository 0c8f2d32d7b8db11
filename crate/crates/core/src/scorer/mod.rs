//! Goal-conditioned transition scoring.
//!
//! Symbols, canonical variable slots and subsymbolic payloads are embedded
//! into a shared `d`-dimensional space. Atoms are composed by one affine
//! layer with `tanh` over the concatenation `[e_pred, e_arg1, ..]` (zero
//! padded to the maximum arity); goals aggregate their atoms. The transition
//! from `G` to a candidate `G'` scores `e_G · e_G'` and the candidates are
//! normalized with a softmax.
//!
//! All parameters live in one flat vector so that optimizers, checkpoints
//! and finite-difference checks can treat them uniformly. Gradients are
//! accumulated into dense buffers of the same length.

mod checkpoint;
mod universal;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub use checkpoint::{read_rng, write_rng, Checkpoint};
pub use universal::{construct_universal_embeddings, tree_transition_probabilities, DerivationTree};

use crate::error::{Error, Result};
use crate::logic::{Atom, Goal, PayloadId, Program, Symbol, Term};
use crate::sld::{CandidateSet, TransitionModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Aggregator {
    Sum,
    Mean,
    /// Learned affine map over the mean of the atom embeddings.
    Affine,
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Sum => "sum",
            Aggregator::Mean => "mean",
            Aggregator::Affine => "affine",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sum" => Ok(Aggregator::Sum),
            "mean" => Ok(Aggregator::Mean),
            "affine" => Ok(Aggregator::Affine),
            other => Err(Error::Config(format!("unknown aggregator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScorerConfig {
    pub dim: usize,
    pub aggregator: Aggregator,
    /// Pool of canonical-variable slot embeddings; slot `k` uses row `k mod var_slots`.
    pub var_slots: usize,
    /// Fallback rows for integers that are not interned in the symbol table.
    pub int_slots: usize,
    /// Arity the atom composer is sized for; at least the program's maximum.
    pub max_arity: usize,
    /// Length of subsymbolic feature vectors (0 disables the projection).
    pub feature_dim: usize,
    pub init_std: f64,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            dim: 64,
            aggregator: Aggregator::Mean,
            var_slots: 16,
            int_slots: 16,
            max_arity: 2,
            feature_dim: 0,
            init_std: 0.1,
        }
    }
}

/// Offsets of each parameter block in the flat vector.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Layout {
    symbols: usize,
    vars: usize,
    ints: usize,
    truth: usize,
    falsity: usize,
    comp_w: usize,
    comp_b: usize,
    agg_w: usize,
    agg_b: usize,
    proj_w: usize,
    proj_b: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &ScorerConfig, symbol_rows: usize) -> Self {
        let d = cfg.dim;
        let comp_in = d * (1 + cfg.max_arity);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let symbols = take(symbol_rows * d);
        let vars = take(cfg.var_slots * d);
        let ints = take(cfg.int_slots * d);
        let truth = take(d);
        let falsity = take(d);
        let comp_w = take(d * comp_in);
        let comp_b = take(d);
        let (agg_w, agg_b) = if cfg.aggregator == Aggregator::Affine {
            (take(d * d), take(d))
        } else {
            (0, 0)
        };
        let (proj_w, proj_b) = if cfg.feature_dim > 0 {
            (take(d * cfg.feature_dim), take(d))
        } else {
            (0, 0)
        };
        Layout {
            symbols,
            vars,
            ints,
            truth,
            falsity,
            comp_w,
            comp_b,
            agg_w,
            agg_b,
            proj_w,
            proj_b,
            total: at,
        }
    }
}

/// Feature vectors for subsymbolic payloads, indexed by payload id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureStore {
    pub feature_dim: usize,
    vectors: Vec<Option<Vec<f64>>>,
}

impl FeatureStore {
    pub fn new(feature_dim: usize) -> Self {
        FeatureStore {
            feature_dim,
            vectors: Vec::new(),
        }
    }

    pub fn insert(&mut self, id: PayloadId, v: Vec<f64>) -> Result<()> {
        if v.len() != self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.feature_dim,
                found: v.len(),
            });
        }
        let i = id.0 as usize;
        if self.vectors.len() <= i {
            self.vectors.resize(i + 1, None);
        }
        self.vectors[i] = Some(v);
        Ok(())
    }

    pub fn get(&self, id: PayloadId) -> Option<&[f64]> {
        self.vectors.get(id.0 as usize).and_then(|v| v.as_deref())
    }

    pub fn len(&self) -> usize {
        self.vectors.iter().filter(|v| v.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The full parameter vector λ of the transition model.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerParams {
    config: ScorerConfig,
    symbol_names: Vec<String>,
    int_rows: HashMap<i64, usize>,
    layout: Layout,
    values: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl ScorerParams {
    /// Gaussian-initialized parameters for the symbols of `program`.
    pub fn new(program: &Program, mut config: ScorerConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(program, config.clone())?;
        config = p.config.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, config.init_std).map_err(|e| Error::Config(e.to_string()))?;
        for v in &mut p.values {
            *v = normal.sample(&mut rng);
        }
        Ok(p)
    }

    pub fn zeros(program: &Program, mut config: ScorerConfig) -> Result<Self> {
        if config.dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if config.var_slots == 0 || config.int_slots == 0 {
            return Err(Error::Config("slot pools must be non-empty".into()));
        }
        config.max_arity = config.max_arity.max(program.max_arity()).max(1);
        let symbol_names = program.symbols.names().to_vec();
        let int_rows = symbol_names
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.parse::<i64>().ok().map(|v| (v, i)))
            .filter(|(v, i)| program.symbols.int_symbol(*v) == Some(Symbol(*i as u32)))
            .collect();
        let layout = Layout::new(&config, symbol_names.len() + 1);
        Ok(ScorerParams {
            values: vec![0.0; layout.total],
            config,
            symbol_names,
            int_rows,
            layout,
        })
    }

    pub fn config(&self) -> &ScorerConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn symbol_names(&self) -> &[String] {
        &self.symbol_names
    }

    pub fn zero_grad(&self) -> Vec<f64> {
        vec![0.0; self.values.len()]
    }

    /// Errors unless the program's symbol table extends the one these
    /// parameters were built for.
    pub fn check_compatible(&self, program: &Program) -> Result<()> {
        let names = program.symbols.names();
        if names.len() < self.symbol_names.len() || names[..self.symbol_names.len()] != self.symbol_names[..] {
            let at = self
                .symbol_names
                .iter()
                .zip(names)
                .position(|(a, b)| a != b)
                .unwrap_or(names.len().min(self.symbol_names.len()));
            return Err(Error::Checkpoint(format!(
                "symbol table mismatch at entry {at}: parameters have {} symbols, program has {}",
                self.symbol_names.len(),
                names.len()
            )));
        }
        if program.max_arity() > self.config.max_arity {
            return Err(Error::Checkpoint(format!(
                "program arity {} exceeds the composer's {}",
                program.max_arity(),
                self.config.max_arity
            )));
        }
        Ok(())
    }

    fn symbol_row(&self, s: Symbol) -> usize {
        let rows = self.symbol_names.len();
        let r = (s.0 as usize).min(rows);
        self.layout.symbols + r * self.config.dim
    }

    /// Offset of the embedding row a leaf term reads from, if any.
    fn leaf_row(&self, t: &Term) -> Option<usize> {
        let d = self.config.dim;
        match t {
            Term::Const(s) => Some(self.symbol_row(*s)),
            Term::Var(v) => Some(self.layout.vars + (v.0 as usize % self.config.var_slots) * d),
            Term::Int(v) => Some(match self.int_rows.get(v) {
                Some(&r) => self.layout.symbols + r * d,
                None => self.layout.ints + (v.rem_euclid(self.config.int_slots as i64) as usize) * d,
            }),
            _ => None,
        }
    }

    fn row(&self, offset: usize) -> &[f64] {
        &self.values[offset..offset + self.config.dim]
    }

    /// The embedding of a symbol's row (out-of-vocabulary symbols share one row).
    pub fn symbol_embedding(&self, s: Symbol) -> &[f64] {
        self.row(self.symbol_row(s))
    }

    pub fn true_embedding(&self) -> &[f64] {
        self.row(self.layout.truth)
    }

    pub fn false_embedding(&self) -> &[f64] {
        self.row(self.layout.falsity)
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let (d, f) = (self.config.dim, self.config.feature_dim);
        let w = &self.values[self.layout.proj_w..self.layout.proj_w + d * f];
        let b = &self.values[self.layout.proj_b..self.layout.proj_b + d];
        (0..d).map(|i| b[i] + dot(&w[i * f..(i + 1) * f], x)).collect()
    }

    fn payload<'s>(&self, id: PayloadId, store: &'s FeatureStore) -> Result<&'s [f64]> {
        if self.config.feature_dim == 0 {
            return Err(Error::Config(
                "subsymbolic term but the scorer has no feature projection".into(),
            ));
        }
        let x = store.get(id).ok_or_else(|| Error::MissingPayload(id.0.to_string()))?;
        if x.len() != self.config.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.feature_dim,
                found: x.len(),
            });
        }
        Ok(x)
    }

    /// Embedding of a term. Compound terms are composed like atoms, with the
    /// functor in the predicate slot.
    pub fn embed_term(&self, t: &Term, store: &FeatureStore) -> Result<Vec<f64>> {
        match t {
            Term::Payload(id) => Ok(self.project(self.payload(*id, store)?)),
            Term::Compound(f, args) => self.compose(*f, args, store).map(|(_, out)| out),
            leaf => Ok(self.row(self.leaf_row(leaf).expect("leaf term")).to_vec()),
        }
    }

    pub fn embed_atom(&self, a: &Atom, store: &FeatureStore) -> Result<Vec<f64>> {
        self.compose(a.predicate, &a.args, store).map(|(_, out)| out)
    }

    /// Returns the composer input and output for `head(args)`.
    fn compose(&self, head: Symbol, args: &[Term], store: &FeatureStore) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.config.dim;
        if args.len() > self.config.max_arity {
            return Err(Error::DimensionMismatch {
                expected: self.config.max_arity,
                found: args.len(),
            });
        }
        let width = d * (1 + self.config.max_arity);
        let mut z = vec![0.0; width];
        z[..d].copy_from_slice(self.symbol_embedding(head));
        for (k, a) in args.iter().enumerate() {
            let e = self.embed_term(a, store)?;
            z[(k + 1) * d..(k + 2) * d].copy_from_slice(&e);
        }
        let w = &self.values[self.layout.comp_w..self.layout.comp_w + d * width];
        let b = &self.values[self.layout.comp_b..self.layout.comp_b + d];
        let out = (0..d)
            .map(|i| (b[i] + dot(&w[i * width..(i + 1) * width], &z)).tanh())
            .collect();
        Ok((z, out))
    }

    pub fn embed_goal(&self, g: &Goal, store: &FeatureStore) -> Result<Vec<f64>> {
        match g {
            Goal::False => Ok(self.false_embedding().to_vec()),
            Goal::Conj(atoms) if atoms.is_empty() => Ok(self.true_embedding().to_vec()),
            Goal::Conj(atoms) => {
                let d = self.config.dim;
                let mut acc = vec![0.0; d];
                for a in atoms {
                    axpy(1.0, &self.embed_atom(a, store)?, &mut acc);
                }
                match self.config.aggregator {
                    Aggregator::Sum => Ok(acc),
                    Aggregator::Mean => {
                        let n = atoms.len() as f64;
                        Ok(acc.into_iter().map(|x| x / n).collect())
                    }
                    Aggregator::Affine => {
                        let n = atoms.len() as f64;
                        let mean: Vec<f64> = acc.into_iter().map(|x| x / n).collect();
                        let w = &self.values[self.layout.agg_w..self.layout.agg_w + d * d];
                        let b = &self.values[self.layout.agg_b..self.layout.agg_b + d];
                        Ok((0..d).map(|i| b[i] + dot(&w[i * d..(i + 1) * d], &mean)).collect())
                    }
                }
            }
        }
    }

    /// Adds `∂(g · embed_term(t)) / ∂λ` to `grad`.
    pub fn backprop_term(&self, t: &Term, g: &[f64], store: &FeatureStore, grad: &mut [f64]) -> Result<()> {
        match t {
            Term::Payload(id) => {
                let x = self.payload(*id, store)?;
                let (d, f) = (self.config.dim, self.config.feature_dim);
                for i in 0..d {
                    if g[i] == 0.0 {
                        continue;
                    }
                    axpy(
                        g[i],
                        x,
                        &mut grad[self.layout.proj_w + i * f..self.layout.proj_w + (i + 1) * f],
                    );
                    grad[self.layout.proj_b + i] += g[i];
                }
                Ok(())
            }
            Term::Compound(f, args) => self.backprop_compose(*f, args, g, store, grad),
            leaf => {
                let off = self.leaf_row(leaf).expect("leaf term");
                axpy(1.0, g, &mut grad[off..off + self.config.dim]);
                Ok(())
            }
        }
    }

    fn backprop_compose(
        &self,
        head: Symbol,
        args: &[Term],
        g: &[f64],
        store: &FeatureStore,
        grad: &mut [f64],
    ) -> Result<()> {
        let d = self.config.dim;
        let width = d * (1 + self.config.max_arity);
        let (z, out) = self.compose(head, args, store)?;
        let gh: Vec<f64> = g.iter().zip(&out).map(|(gi, o)| gi * (1.0 - o * o)).collect();
        let w_off = self.layout.comp_w;
        let mut gz = vec![0.0; width];
        for i in 0..d {
            if gh[i] == 0.0 {
                continue;
            }
            axpy(gh[i], &z, &mut grad[w_off + i * width..w_off + (i + 1) * width]);
            grad[self.layout.comp_b + i] += gh[i];
            axpy(gh[i], &self.values[w_off + i * width..w_off + (i + 1) * width], &mut gz);
        }
        let head_off = self.symbol_row(head);
        axpy(1.0, &gz[..d], &mut grad[head_off..head_off + d]);
        for (k, a) in args.iter().enumerate() {
            self.backprop_term(a, &gz[(k + 1) * d..(k + 2) * d], store, grad)?;
        }
        Ok(())
    }

    pub fn backprop_atom(&self, a: &Atom, g: &[f64], store: &FeatureStore, grad: &mut [f64]) -> Result<()> {
        self.backprop_compose(a.predicate, &a.args, g, store, grad)
    }

    /// Adds `∂(g · embed_goal(goal)) / ∂λ` to `grad`.
    pub fn backprop_goal(&self, goal: &Goal, g: &[f64], store: &FeatureStore, grad: &mut [f64]) -> Result<()> {
        let d = self.config.dim;
        match goal {
            Goal::False => {
                axpy(1.0, g, &mut grad[self.layout.falsity..self.layout.falsity + d]);
                Ok(())
            }
            Goal::Conj(atoms) if atoms.is_empty() => {
                axpy(1.0, g, &mut grad[self.layout.truth..self.layout.truth + d]);
                Ok(())
            }
            Goal::Conj(atoms) => {
                let n = atoms.len() as f64;
                let per_atom: Vec<f64> = match self.config.aggregator {
                    Aggregator::Sum => g.to_vec(),
                    Aggregator::Mean => g.iter().map(|x| x / n).collect(),
                    Aggregator::Affine => {
                        let mut mean = vec![0.0; d];
                        for a in atoms {
                            axpy(1.0 / n, &self.embed_atom(a, store)?, &mut mean);
                        }
                        let mut gm = vec![0.0; d];
                        for i in 0..d {
                            let row = self.layout.agg_w + i * d;
                            axpy(g[i], &mean, &mut grad[row..row + d]);
                            grad[self.layout.agg_b + i] += g[i];
                            axpy(g[i], &self.values[row..row + d], &mut gm);
                        }
                        gm.iter().map(|x| x / n).collect()
                    }
                };
                for a in atoms {
                    self.backprop_atom(a, &per_atom, store, grad)?;
                }
                Ok(())
            }
        }
    }
}

/// Scalar product of two embeddings.
pub fn compatibility(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(dot(a, b))
}

/// Log-softmax with max subtraction.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = scores.iter().map(|s| (s - m).exp()).sum();
    let lz = m + z.ln();
    scores.iter().map(|s| s - lz).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionDistribution {
    pub goal: Goal,
    pub scores: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub probs: Vec<f64>,
}

impl TransitionDistribution {
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().zip(&self.log_probs).map(|(p, l)| p * l).sum::<f64>()
    }
}

/// The scorer bound to a feature store: a [`TransitionModel`] with gradients.
#[derive(Clone, Copy, Debug)]
pub struct NeuralPolicy<'a> {
    pub params: &'a ScorerParams,
    pub store: &'a FeatureStore,
}

impl<'a> NeuralPolicy<'a> {
    pub fn new(params: &'a ScorerParams, store: &'a FeatureStore) -> Self {
        NeuralPolicy { params, store }
    }

    /// Softmax over `e_G · e_G'` for every candidate `G'` (forced sets get
    /// probability one).
    pub fn distribution(&self, cands: &CandidateSet) -> Result<TransitionDistribution> {
        let scores = if cands.forced {
            vec![0.0]
        } else {
            let eg = self.params.embed_goal(&cands.goal, self.store)?;
            cands
                .candidates
                .iter()
                .map(|c| Ok(dot(&eg, &self.params.embed_goal(&c.next_goal, self.store)?)))
                .collect::<Result<Vec<f64>>>()?
        };
        let log_probs = log_softmax(&scores);
        let probs = log_probs.iter().map(|l| l.exp()).collect();
        Ok(TransitionDistribution {
            goal: cands.goal.clone(),
            scores,
            log_probs,
            probs,
        })
    }

    /// Adds `Σ_k score_grads[k] · ∂s_k/∂λ` to `grad`, where `s_k = e_G · e_{G_k}`.
    pub fn backprop_scores(&self, cands: &CandidateSet, score_grads: &[f64], grad: &mut [f64]) -> Result<()> {
        if cands.forced {
            return Ok(());
        }
        let d = self.params.dim();
        let eg = self.params.embed_goal(&cands.goal, self.store)?;
        let mut g_goal = vec![0.0; d];
        for (c, &sg) in cands.candidates.iter().zip(score_grads) {
            if sg == 0.0 {
                continue;
            }
            let ek = self.params.embed_goal(&c.next_goal, self.store)?;
            axpy(sg, &ek, &mut g_goal);
            let gk: Vec<f64> = eg.iter().map(|x| sg * x).collect();
            self.params.backprop_goal(&c.next_goal, &gk, self.store, grad)?;
        }
        self.params.backprop_goal(&cands.goal, &g_goal, self.store, grad)
    }

    /// Adds `weight · ∇ log p(chosen | G)` to `grad` and returns the log-probability.
    pub fn accumulate_logprob_grad(
        &self,
        cands: &CandidateSet,
        chosen: usize,
        weight: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        if chosen >= cands.len() {
            return Err(Error::IndexOutOfRange {
                index: chosen,
                len: cands.len(),
            });
        }
        let dist = self.distribution(cands)?;
        if weight != 0.0 {
            let sg: Vec<f64> = dist
                .probs
                .iter()
                .enumerate()
                .map(|(k, p)| weight * (if k == chosen { 1.0 } else { 0.0 } - p))
                .collect();
            self.backprop_scores(cands, &sg, grad)?;
        }
        Ok(dist.log_probs[chosen])
    }

    /// `log p(chosen | G)` and its gradient over the flattened parameters.
    pub fn logprob_and_grad(&self, cands: &CandidateSet, chosen: usize) -> Result<(f64, Vec<f64>)> {
        let mut grad = self.params.zero_grad();
        let lp = self.accumulate_logprob_grad(cands, chosen, 1.0, &mut grad)?;
        Ok((lp, grad))
    }

    /// Adds `weight · ∇H` (entropy of the distribution at `cands`) to `grad`; returns `H`.
    pub fn accumulate_entropy_grad(&self, cands: &CandidateSet, weight: f64, grad: &mut [f64]) -> Result<f64> {
        let dist = self.distribution(cands)?;
        let h = dist.entropy();
        if weight != 0.0 && !cands.forced {
            let sg: Vec<f64> = dist
                .probs
                .iter()
                .zip(&dist.log_probs)
                .map(|(p, l)| -weight * p * (l + h))
                .collect();
            self.backprop_scores(cands, &sg, grad)?;
        }
        Ok(h)
    }
}

impl TransitionModel for NeuralPolicy<'_> {
    fn probabilities(&self, cands: &CandidateSet) -> Result<Vec<f64>> {
        Ok(self.distribution(cands)?.probs)
    }
}

/// Convenience wrapper matching the free-function form of the transition model.
pub fn transition_distribution(
    cands: &CandidateSet,
    params: &ScorerParams,
    store: &FeatureStore,
) -> Result<TransitionDistribution> {
    NeuralPolicy::new(params, store).distribution(cands)
}
