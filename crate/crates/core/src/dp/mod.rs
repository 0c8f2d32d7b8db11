//! Exact inference and training by dynamic programming over the goal graph.
//!
//! The success probability of a query is the value of the recursion
//! `V(G) = Σ_a π(G' | G) · V(G')` with `V(True) = 1` and `V(False) = 0`,
//! evaluated under the environment's action semantics (`False` action plus
//! visited-goal memory) and a depth budget. Every node of the recursion is
//! kept, so the exact gradient of `p_success` follows from one reverse pass.
//!
//! When the reachable goal graph has no cycles the memory rule never fires
//! and nodes are shared by `(goal, remaining depth)`. Otherwise the set of
//! goals visited on the current path is part of the key.

mod carry;

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

pub use carry::{carry_tables, mnist_sum_probability, mnist_sum_probability_grad, CarryTables, DigitDist};

use crate::error::{Error, Result};
use crate::logic::{ClauseId, Goal, Program};
use crate::optim::Optimizer;
use crate::scorer::{FeatureStore, NeuralPolicy, ScorerParams};
use crate::sld::{candidate_next_goals, step_probabilities, CandidateOptions, CandidateSet, TransitionModel};

/// Default bound on the number of DP states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpConfig {
    pub max_depth: usize,
    pub cap: usize,
    pub candidates: CandidateOptions,
}

impl DpConfig {
    pub fn new(max_depth: usize) -> Self {
        DpConfig {
            max_depth,
            cap: DEFAULT_STATE_CAP,
            candidates: CandidateOptions::with_false(),
        }
    }
}

/// A query with its label and the clauses hidden while it is solved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledQuery {
    pub goal: Goal,
    pub label: bool,
    pub banned: Vec<ClauseId>,
}

impl LabeledQuery {
    pub fn new(goal: Goal, label: bool) -> Self {
        LabeledQuery {
            goal,
            label,
            banned: Vec::new(),
        }
    }
}

#[derive(Clone, Debug)]
enum Child {
    Node(usize),
    Leaf(f64),
}

#[derive(Clone, Debug)]
struct Node {
    cands: Arc<CandidateSet>,
    probs: Vec<f64>,
    children: Vec<Child>,
    value: f64,
}

/// The solved recursion for one query.
#[derive(Clone, Debug)]
pub struct ValueTable {
    nodes: Vec<Node>,
    root: Child,
    cyclic: bool,
    goals: usize,
}

impl ValueTable {
    pub fn success_probability(&self) -> f64 {
        self.child_value(&self.root)
    }

    /// `V(q, y) = (2y - 1) · p_success(q)`.
    pub fn value(&self, label: bool) -> f64 {
        sign(label) * self.success_probability()
    }

    /// Number of DP states expanded.
    pub fn states(&self) -> usize {
        self.nodes.len()
    }

    /// Number of distinct goals reachable within the depth budget.
    pub fn reachable_goals(&self) -> usize {
        self.goals
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    fn child_value(&self, c: &Child) -> f64 {
        match c {
            Child::Node(i) => self.nodes[*i].value,
            Child::Leaf(v) => *v,
        }
    }

    /// Recomputes every state's value from its children in completion order
    /// and returns the root value.
    pub fn recompute_bottom_up(&self) -> f64 {
        let mut vals = vec![0.0; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            vals[i] = n
                .children
                .iter()
                .zip(&n.probs)
                .map(|(c, p)| {
                    p * match c {
                        Child::Node(j) => vals[*j],
                        Child::Leaf(v) => *v,
                    }
                })
                .sum();
        }
        match self.root {
            Child::Node(i) => vals[i],
            Child::Leaf(v) => v,
        }
    }

    /// Adds `weight · ∇ p_success` to `grad`.
    pub fn accumulate_gradient(&self, policy: &NeuralPolicy<'_>, weight: f64, grad: &mut [f64]) -> Result<()> {
        let Child::Node(root) = self.root else {
            return Ok(());
        };
        let mut adj = vec![0.0; self.nodes.len()];
        adj[root] = weight;
        // children always complete before their parents
        for i in (0..=root).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let n = &self.nodes[i];
            let mut sg = Vec::with_capacity(n.probs.len());
            for (c, &p) in n.children.iter().zip(&n.probs) {
                let vk = self.child_value(c);
                sg.push(a * p * (vk - n.value));
                if let Child::Node(j) = c {
                    adj[*j] += a * p;
                }
            }
            policy.backprop_scores(&n.cands, &sg, grad)?;
        }
        Ok(())
    }
}

fn sign(label: bool) -> f64 {
    if label {
        1.0
    } else {
        -1.0
    }
}

/// Explores the goal graph reachable within `max_depth` steps (without
/// memory) and reports whether it has a cycle, plus its size.
fn analyze_graph(query: &Goal, program: &Program, cfg: &DpConfig) -> Result<(bool, usize)> {
    let mut ids: HashMap<Goal, usize> = HashMap::new();
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    ids.insert(query.clone(), 0);
    edges.push(Vec::new());
    queue.push_back((query.clone(), 0usize));
    while let Some((g, depth)) = queue.pop_front() {
        if g.is_terminal() || depth >= cfg.max_depth {
            continue;
        }
        let from = ids[&g];
        let set = candidate_next_goals(&g, program, &cfg.candidates);
        for c in set.candidates {
            let to = match ids.get(&c.next_goal) {
                Some(&j) => j,
                None => {
                    let j = ids.len();
                    if j >= cfg.cap {
                        return Err(goal_space_error(cfg.cap));
                    }
                    ids.insert(c.next_goal.clone(), j);
                    edges.push(Vec::new());
                    queue.push_back((c.next_goal, depth + 1));
                    j
                }
            };
            edges[from].push(to);
        }
    }
    // iterative three-colour DFS
    let n = edges.len();
    let mut colour = vec![0u8; n];
    for start in 0..n {
        if colour[start] != 0 {
            continue;
        }
        let mut stack = vec![(start, 0usize)];
        colour[start] = 1;
        while let Some(&mut (v, ref mut next)) = stack.last_mut() {
            if *next < edges[v].len() {
                let w = edges[v][*next];
                *next += 1;
                match colour[w] {
                    0 => {
                        colour[w] = 1;
                        stack.push((w, 0));
                    }
                    1 => return Ok((true, n)),
                    _ => {}
                }
            } else {
                colour[v] = 2;
                stack.pop();
            }
        }
    }
    Ok((false, n))
}

fn goal_space_error(cap: usize) -> Error {
    Error::ResourceLimit {
        what: "reachable goal space (use the policy-gradient trainer for this task)".into(),
        cap,
    }
}

type Key = (Goal, usize, Vec<u64>);

struct Solver<'a> {
    program: &'a Program,
    model: &'a dyn TransitionModel,
    cfg: &'a DpConfig,
    cyclic: bool,
    memo: HashMap<Key, usize>,
    nodes: Vec<Node>,
}

impl Solver<'_> {
    fn key(&self, g: &Goal, remaining: usize, path: &HashSet<Goal>) -> Key {
        let ctx = if self.cyclic {
            let mut v: Vec<u64> = path.iter().map(Goal::fingerprint).collect();
            v.sort_unstable();
            v
        } else {
            Vec::new()
        };
        (g.clone(), remaining, ctx)
    }

    fn solve(&mut self, g: &Goal, remaining: usize, path: &mut HashSet<Goal>) -> Result<Child> {
        if g.is_true() {
            return Ok(Child::Leaf(1.0));
        }
        if g.is_false() || remaining == 0 {
            return Ok(Child::Leaf(0.0));
        }
        let key = self.key(g, remaining, path);
        if let Some(&i) = self.memo.get(&key) {
            return Ok(Child::Node(i));
        }
        let set = candidate_next_goals(g, self.program, &self.cfg.candidates).without_visited(|x| path.contains(x));
        if set.is_empty() {
            return Ok(Child::Leaf(0.0));
        }
        let probs = step_probabilities(self.model, &set)?;
        let mut children = Vec::with_capacity(set.len());
        let mut value = 0.0;
        for (c, p) in set.candidates.iter().zip(&probs) {
            let fresh = path.insert(c.next_goal.clone());
            let child = self.solve(&c.next_goal, remaining - 1, path);
            if fresh {
                path.remove(&c.next_goal);
            }
            let child = child?;
            value += p * match &child {
                Child::Node(j) => self.nodes[*j].value,
                Child::Leaf(v) => *v,
            };
            children.push(child);
        }
        if self.nodes.len() >= self.cfg.cap {
            return Err(goal_space_error(self.cfg.cap));
        }
        let i = self.nodes.len();
        self.nodes.push(Node {
            cands: Arc::new(set),
            probs,
            children,
            value,
        });
        self.memo.insert(key, i);
        Ok(Child::Node(i))
    }
}

/// Solves the value recursion for `query`.
pub fn solve(query: &Goal, program: &Program, model: &dyn TransitionModel, cfg: &DpConfig) -> Result<ValueTable> {
    let (cyclic, goals) = analyze_graph(query, program, cfg)?;
    if cyclic {
        log::debug!("goal graph has cycles; DP states include the visited path ({goals} reachable goals)");
    }
    let mut solver = Solver {
        program,
        model,
        cfg,
        cyclic,
        memo: HashMap::new(),
        nodes: Vec::new(),
    };
    let mut path = HashSet::new();
    path.insert(query.clone());
    let root = solver.solve(query, cfg.max_depth, &mut path)?;
    Ok(ValueTable {
        nodes: solver.nodes,
        root,
        cyclic,
        goals,
    })
}

pub fn success_probability_dp(
    query: &Goal,
    program: &Program,
    model: &dyn TransitionModel,
    cfg: &DpConfig,
) -> Result<f64> {
    Ok(solve(query, program, model, cfg)?.success_probability())
}

/// `V(q, y)` under the given transition model.
pub fn value(query: &Goal, label: bool, program: &Program, model: &dyn TransitionModel, cfg: &DpConfig) -> Result<f64> {
    Ok(solve(query, program, model, cfg)?.value(label))
}

/// Loss `L = Σ (1 - 2y) p`, its dual `J = -L`, and `∇J`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchObjective {
    pub loss: f64,
    pub j: f64,
    pub probs: Vec<f64>,
    pub grad_j: Vec<f64>,
}

impl BatchObjective {
    pub fn mean_probability(&self, data: &[LabeledQuery], label: bool) -> f64 {
        let v: Vec<f64> = data
            .iter()
            .zip(&self.probs)
            .filter(|(q, _)| q.label == label)
            .map(|(_, p)| *p)
            .collect();
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    }
}

/// Exact objective and gradient over a batch, in dataset order.
pub fn batch_objective(
    data: &[LabeledQuery],
    program: &Program,
    params: &ScorerParams,
    store: &FeatureStore,
    cfg: &DpConfig,
) -> Result<BatchObjective> {
    let policy = NeuralPolicy::new(params, store);
    let mut grad = params.zero_grad();
    let mut probs = Vec::with_capacity(data.len());
    let mut loss = 0.0;
    let mut j = 0.0;
    for q in data {
        let qcfg = DpConfig {
            candidates: CandidateOptions {
                banned: q.banned.clone(),
                ..cfg.candidates.clone()
            },
            ..cfg.clone()
        };
        let table = solve(&q.goal, program, &policy, &qcfg)?;
        let p = table.success_probability();
        loss += (1.0 - 2.0 * (q.label as u8 as f64)) * p;
        j += sign(q.label) * p;
        table.accumulate_gradient(&policy, sign(q.label), &mut grad)?;
        probs.push(p);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("loss {loss} over {} queries", data.len())));
    }
    Ok(BatchObjective {
        loss,
        j,
        probs,
        grad_j: grad,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub j: f64,
    pub mean_p_pos: f64,
    pub mean_p_neg: f64,
    pub grad_norm: f64,
}

/// One full-batch ascent step on `J`; statistics refer to the parameters
/// before the update.
pub fn dp_train_epoch(
    data: &[LabeledQuery],
    program: &Program,
    params: &mut ScorerParams,
    store: &FeatureStore,
    opt: &mut Optimizer,
    cfg: &DpConfig,
) -> Result<EpochStats> {
    let obj = batch_objective(data, program, params, store, cfg)?;
    opt.ascend(params.as_mut_slice(), &obj.grad_j)?;
    Ok(EpochStats {
        loss: obj.loss,
        j: obj.j,
        mean_p_pos: obj.mean_probability(data, true),
        mean_p_neg: obj.mean_probability(data, false),
        grad_norm: crate::optim::norm(&obj.grad_j),
    })
}

/// Coefficients multiplying `∇p` for one query: in `∇J` it is `2y - 1`, in the
/// cross-entropy gradient (ascent direction) it is `(y - p) / (p (1 - p))`.
pub fn gradient_coefficients(p: f64, label: bool) -> (f64, f64) {
    let y = label as u8 as f64;
    (2.0 * y - 1.0, (y - p) / (p * (1.0 - p)))
}
