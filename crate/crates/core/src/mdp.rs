//! SLD resolution as an episodic decision process.
//!
//! States are goals, actions pick a resolvent of the leftmost atom (or
//! abandon the proof with `False`), transitions are deterministic, and the
//! only reward is paid on reaching the empty goal: `+1` for a positive
//! query, `-1` for a negative one. Each episode remembers the goals it has
//! visited and never offers an action leading back to one of them.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logic::{Goal, Program};
use crate::sld::{candidate_next_goals, CandidateOptions, CandidateSet, Outcome};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvState {
    pub goal: Goal,
    visited: Arc<HashSet<Goal>>,
    pub depth: usize,
    label: bool,
    pub query_id: usize,
}

impl EnvState {
    pub fn has_visited(&self, g: &Goal) -> bool {
        self.visited.contains(g)
    }

    pub fn visited_count(&self) -> usize {
        self.visited.len()
    }

    pub fn is_terminal(&self) -> bool {
        self.goal.is_terminal()
    }

    pub fn label(&self) -> bool {
        self.label
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvAction {
    /// Index of a resolvent in the state's legal candidate set.
    Choose(usize),
    False,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub outcome: Option<Outcome>,
}

/// Terminal reward `2y - 1` on the empty goal, zero otherwise.
pub fn reward(goal: &Goal, label: bool) -> f64 {
    if goal.is_true() {
        if label {
            1.0
        } else {
            -1.0
        }
    } else {
        0.0
    }
}

/// One line of the optional episode trace.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub query_id: usize,
    pub step: usize,
    pub action: String,
    pub goal_hash: u64,
    pub reward: f64,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "query={} step={} action={} goal={:016x} reward={}",
            self.query_id, self.step, self.action, self.goal_hash, self.reward
        )
    }
}

#[derive(Clone, Debug)]
pub struct Env<'p> {
    pub program: &'p Program,
    pub max_depth: usize,
    options: CandidateOptions,
}

impl<'p> Env<'p> {
    pub fn new(program: &'p Program, max_depth: usize) -> Self {
        Self::with_options(program, max_depth, CandidateOptions::with_false())
    }

    /// `options.include_false` is forced on.
    pub fn with_options(program: &'p Program, max_depth: usize, mut options: CandidateOptions) -> Self {
        options.include_false = true;
        Env {
            program,
            max_depth,
            options,
        }
    }

    pub fn options(&self) -> &CandidateOptions {
        &self.options
    }

    pub fn reset(&self, query: &Goal, label: bool, query_id: usize) -> Result<EnvState> {
        if query.is_terminal() {
            return Err(Error::TerminalQuery);
        }
        let mut visited = HashSet::new();
        visited.insert(query.clone());
        Ok(EnvState {
            goal: query.clone(),
            visited: Arc::new(visited),
            depth: 0,
            label,
            query_id,
        })
    }

    /// Candidate successors minus those already visited in this episode.
    /// Stochastic choices always keep the `False` action.
    pub fn legal_actions(&self, s: &EnvState) -> CandidateSet {
        candidate_next_goals(&s.goal, self.program, &self.options).without_visited(|g| s.visited.contains(g))
    }

    /// Position of `a` in `cands`, if legal.
    pub fn action_index(&self, cands: &CandidateSet, a: EnvAction) -> Result<usize> {
        match a {
            EnvAction::Choose(i) if i < cands.len() && !cands.candidates[i].action.is_false() => Ok(i),
            EnvAction::False => cands
                .candidates
                .iter()
                .position(|c| c.action.is_false())
                .ok_or_else(|| Error::IllegalAction("False is not available for a forced step".into())),
            EnvAction::Choose(i) => Err(Error::IllegalAction(format!(
                "choice {i} with {} clause candidates",
                cands.clause_count()
            ))),
        }
    }

    pub fn step(&self, s: &EnvState, a: EnvAction) -> Result<StepResult> {
        let cands = self.legal_actions(s);
        let k = self.action_index(&cands, a)?;
        self.step_index(s, &cands, k)
    }

    /// Takes candidate `k` of `cands`, which must be `legal_actions(s)`.
    pub fn step_index(&self, s: &EnvState, cands: &CandidateSet, k: usize) -> Result<StepResult> {
        if s.is_terminal() {
            return Err(Error::IllegalAction("episode already finished".into()));
        }
        let cand = cands.candidates.get(k).ok_or(Error::IndexOutOfRange {
            index: k,
            len: cands.len(),
        })?;
        let next = cand.next_goal.clone();
        let mut visited = (*s.visited).clone();
        visited.insert(next.clone());
        let depth = s.depth + 1;
        let outcome = if next.is_true() {
            Some(Outcome::True)
        } else if next.is_false() {
            Some(Outcome::False)
        } else if depth >= self.max_depth {
            Some(Outcome::DepthExceeded)
        } else {
            None
        };
        Ok(StepResult {
            reward: reward(&next, s.label),
            done: outcome.is_some(),
            outcome,
            next_state: EnvState {
                goal: next,
                visited: Arc::new(visited),
                depth,
                label: s.label,
                query_id: s.query_id,
            },
        })
    }

    pub fn trace_record(&self, s: &EnvState, cands: &CandidateSet, k: usize, r: &StepResult) -> TraceRecord {
        TraceRecord {
            query_id: s.query_id,
            step: s.depth,
            action: cands.candidates[k].action.label(),
            goal_hash: r.next_state.goal.fingerprint(),
            reward: r.reward,
        }
    }
}
