use std::collections::HashSet;
use std::sync::Arc;

use super::{apply_action, builtins, candidate_next_goals, Action, Builtin, CandidateOptions, CandidateSet};
use crate::error::{Error, Result};
use crate::logic::{rename_apart, unify, Atom, Goal, Program, Substitution, VarCounter};

/// A conditional distribution over the candidates of a goal.
pub trait TransitionModel {
    /// Probabilities aligned with `cands.candidates`; must sum to one.
    fn probabilities(&self, cands: &CandidateSet) -> Result<Vec<f64>>;
}

/// Every candidate equally likely.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformModel;

impl TransitionModel for UniformModel {
    fn probabilities(&self, cands: &CandidateSet) -> Result<Vec<f64>> {
        let n = cands.len();
        Ok(vec![1.0 / n as f64; n])
    }
}

impl<T: TransitionModel + ?Sized> TransitionModel for &T {
    fn probabilities(&self, cands: &CandidateSet) -> Result<Vec<f64>> {
        (**self).probabilities(cands)
    }
}

/// Step distribution, honoring forced (built-in) transitions.
pub fn step_probabilities(model: &dyn TransitionModel, cands: &CandidateSet) -> Result<Vec<f64>> {
    if cands.forced {
        return Ok(vec![1.0]);
    }
    if cands.is_empty() {
        return Ok(Vec::new());
    }
    model.probabilities(cands)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolutionStep {
    pub candidates: Arc<CandidateSet>,
    pub chosen: usize,
    /// Transition probability, filled when a model is attached.
    pub prob: Option<f64>,
}

impl ResolutionStep {
    pub fn goal(&self) -> &Goal {
        &self.candidates.goal
    }

    pub fn action(&self) -> &Action {
        &self.candidates.candidates[self.chosen].action
    }

    pub fn next_goal(&self) -> &Goal {
        &self.candidates.candidates[self.chosen].next_goal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    True,
    False,
    DepthExceeded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub query: Goal,
    pub steps: Vec<ResolutionStep>,
    pub outcome: Outcome,
}

impl Derivation {
    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::True
    }

    pub fn final_goal(&self) -> &Goal {
        self.steps.last().map(|s| s.next_goal()).unwrap_or(&self.query)
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.steps.iter().map(ResolutionStep::action)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumerateOptions {
    pub candidates: CandidateOptions,
    /// Exclude candidates leading to a goal already on the current path.
    pub memory: bool,
    /// Maximum number of derivations before giving up.
    pub cap: usize,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions {
            candidates: CandidateOptions::default(),
            memory: false,
            cap: 1_000_000,
        }
    }
}

impl EnumerateOptions {
    /// The environment's action semantics: `False` action plus visited-goal memory.
    pub fn mdp() -> Self {
        EnumerateOptions {
            candidates: CandidateOptions::with_false(),
            memory: true,
            cap: 1_000_000,
        }
    }
}

/// Depth-first, clause-ordered enumeration of every derivation of `query`
/// with at most `max_depth` steps.
pub fn enumerate_derivations(
    query: &Goal,
    program: &Program,
    max_depth: usize,
    opts: &EnumerateOptions,
) -> Result<Vec<Derivation>> {
    let mut out = Vec::new();
    let mut path = Vec::new();
    let mut visited = HashSet::new();
    visited.insert(query.clone());
    walk(
        query,
        query,
        program,
        max_depth,
        opts,
        &mut path,
        &mut visited,
        &mut out,
    )?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    query: &Goal,
    goal: &Goal,
    program: &Program,
    max_depth: usize,
    opts: &EnumerateOptions,
    path: &mut Vec<ResolutionStep>,
    visited: &mut HashSet<Goal>,
    out: &mut Vec<Derivation>,
) -> Result<()> {
    let finish = |outcome, path: &Vec<ResolutionStep>, out: &mut Vec<Derivation>| -> Result<()> {
        if out.len() >= opts.cap {
            return Err(Error::ResourceLimit {
                what: "derivation enumeration".into(),
                cap: opts.cap,
            });
        }
        out.push(Derivation {
            query: query.clone(),
            steps: path.clone(),
            outcome,
        });
        Ok(())
    };
    if goal.is_true() {
        return finish(Outcome::True, path, out);
    }
    if goal.is_false() {
        return finish(Outcome::False, path, out);
    }
    if path.len() >= max_depth {
        return finish(Outcome::DepthExceeded, path, out);
    }
    let mut set = candidate_next_goals(goal, program, &opts.candidates);
    if opts.memory {
        set = set.without_visited(|g| visited.contains(g));
    }
    if set.is_empty() {
        return finish(Outcome::False, path, out);
    }
    let set = Arc::new(set);
    for (k, cand) in set.candidates.iter().enumerate() {
        path.push(ResolutionStep {
            candidates: set.clone(),
            chosen: k,
            prob: None,
        });
        let fresh = visited.insert(cand.next_goal.clone());
        let r = walk(query, &cand.next_goal, program, max_depth, opts, path, visited, out);
        if fresh {
            visited.remove(&cand.next_goal);
        }
        path.pop();
        r?;
    }
    Ok(())
}

/// Product of the per-step transition probabilities.
pub fn derivation_probability(d: &Derivation, model: &dyn TransitionModel) -> Result<f64> {
    let mut p = 1.0;
    for (i, step) in d.steps.iter().enumerate() {
        let probs = step_probabilities(model, &step.candidates)?;
        match probs.get(step.chosen) {
            Some(q) => p *= q,
            None => return Err(Error::UndefinedTransition { step: i }),
        }
        if i + 1 < d.steps.len() && d.steps[i + 1].goal() != step.next_goal() {
            return Err(Error::UndefinedTransition { step: i + 1 });
        }
    }
    Ok(p)
}

/// Sum of the probabilities of all successful derivations within `max_depth`.
pub fn success_probability_bruteforce(
    query: &Goal,
    program: &Program,
    model: &dyn TransitionModel,
    max_depth: usize,
    opts: &EnumerateOptions,
) -> Result<f64> {
    let mut total = 0.0;
    for d in enumerate_derivations(query, program, max_depth, opts)? {
        if d.is_success() {
            total += derivation_probability(&d, model)?;
        }
    }
    Ok(total)
}

/// Re-execution of an action sequence on a goal without canonical renaming,
/// so the caller's variables keep their identity.
#[derive(Clone, Debug)]
pub struct Replay {
    /// Composition of all step unifiers, over the query's and the renamed clauses' variables.
    pub answer: Substitution,
    /// For each step: the selected atom (under the final answer), the action
    /// and the number of body atoms it introduced.
    pub selected: Vec<(Atom, Action, usize)>,
    pub final_goal: Goal,
}

/// Replays `actions` from `query` (whose atoms may use arbitrary variable ids).
/// Errors if an action does not apply.
pub fn replay(query: &[Atom], program: &Program, actions: &[Action], occurs_check: bool) -> Result<Replay> {
    let mut next = 0u32;
    for a in query {
        a.for_each_var(&mut |v| next = next.max(v.0 + 1));
    }
    let mut counter = VarCounter::starting_at(next);
    let mut goal: Vec<Atom> = query.to_vec();
    let mut answer = Substitution::new();
    let mut selected = Vec::new();
    for (i, action) in actions.iter().enumerate() {
        let illegal = |why: &str| Error::IllegalAction(format!("step {i}: {why}"));
        if action.is_false() {
            selected.push((
                goal.first().cloned().ok_or_else(|| illegal("empty goal"))?,
                Action::False,
                0,
            ));
            return Ok(Replay {
                answer,
                selected: finish_selected(selected, &Substitution::new()),
                final_goal: Goal::False,
            });
        }
        let first = goal.first().cloned().ok_or_else(|| illegal("goal already proved"))?;
        let (theta, body) = match action {
            Action::Clause { id, .. } => {
                if id.0 >= program.len() {
                    return Err(illegal("unknown clause"));
                }
                let c = rename_apart(program.clause(*id), &mut counter);
                let theta = unify(&first, &c.head, occurs_check).ok_or_else(|| illegal("head does not unify"))?;
                (theta, c.body)
            }
            Action::Builtin { choice, .. } => {
                let b = Builtin::lookup(program, &first).ok_or_else(|| illegal("not a built-in"))?;
                let sols = builtins::solve(program, b, &first, occurs_check);
                let theta = sols
                    .into_iter()
                    .nth(*choice)
                    .ok_or_else(|| illegal("built-in has no such solution"))?;
                (theta, Vec::new())
            }
            Action::False => unreachable!(),
        };
        selected.push((first, action.clone(), body.len()));
        goal = body
            .iter()
            .chain(goal[1..].iter())
            .map(|a| theta.apply_atom(a))
            .collect();
        answer = answer.compose(&theta);
    }
    let final_goal = Goal::new(goal);
    Ok(Replay {
        selected: finish_selected(selected, &answer),
        answer,
        final_goal,
    })
}

fn finish_selected(sel: Vec<(Atom, Action, usize)>, answer: &Substitution) -> Vec<(Atom, Action, usize)> {
    sel.into_iter()
        .map(|(a, act, n)| (answer.apply_atom(&a), act, n))
        .collect()
}

impl Derivation {
    /// Replays the actions from the (canonical) query.
    pub fn replay(&self, program: &Program) -> Result<Replay> {
        let actions: Vec<Action> = self.actions().cloned().collect();
        replay(self.query.atoms(), program, &actions, false)
    }

    /// Checks that every step's successor is what resolution produces.
    pub fn validate(&self, program: &Program) -> bool {
        let mut goal = &self.query;
        for s in &self.steps {
            if s.goal() != goal || apply_action(goal, s.action(), program) != *s.next_goal() {
                return false;
            }
            goal = s.next_goal();
        }
        true
    }
}
