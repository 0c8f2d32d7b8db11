//! SLD resolution over the leftmost atom.
//!
//! [`candidate_next_goals`] builds the support of the transition
//! distribution for a goal; [`enumerate_derivations`] is the exhaustive
//! depth-bounded search used as the reference for every probabilistic
//! computation in the crate.

pub mod builtins;
mod derivation;

pub use builtins::Builtin;
pub use derivation::{
    derivation_probability, enumerate_derivations, replay, step_probabilities, success_probability_bruteforce,
    Derivation, EnumerateOptions, Outcome, Replay, ResolutionStep, TransitionModel, UniformModel,
};

use crate::logic::{rename_apart, unify, Clause, ClauseId, Goal, Program, Substitution, VarCounter};

/// How a candidate successor was produced.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    /// Resolution with a program clause under `mgu` (over the goal's variables
    /// and the clause's standardized-apart variables).
    Clause {
        id: ClauseId,
        mgu: Substitution,
    },
    /// Reduction of an evaluable built-in; `choice` indexes its solution list.
    Builtin {
        choice: usize,
        mgu: Substitution,
    },
    False,
}

impl Action {
    pub fn clause_id(&self) -> Option<ClauseId> {
        match self {
            Action::Clause { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Action::False)
    }

    pub fn label(&self) -> String {
        match self {
            Action::Clause { id, .. } => format!("clause:{}", id.0),
            Action::Builtin { choice, .. } => format!("builtin:{choice}"),
            Action::False => "false".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub action: Action,
    pub next_goal: Goal,
}

/// The successors of a goal, ordered by ascending clause id, with the
/// `False` candidate (when present) last.
///
/// A `forced` set holds exactly one candidate reached with probability one;
/// it arises when the leftmost atom is a deterministic built-in.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CandidateSet {
    pub goal: Goal,
    pub candidates: Vec<Candidate>,
    pub include_false: bool,
    pub forced: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn next_goals(&self) -> impl Iterator<Item = &Goal> {
        self.candidates.iter().map(|c| &c.next_goal)
    }

    /// Number of non-`False` candidates.
    pub fn clause_count(&self) -> usize {
        self.candidates.iter().filter(|c| !c.action.is_false()).count()
    }

    pub fn position_of(&self, next: &Goal) -> Option<usize> {
        self.candidates.iter().position(|c| &c.next_goal == next)
    }

    /// Drops candidates whose successor satisfies `seen`. A forced candidate
    /// that is dropped is replaced by a forced `False`.
    pub fn without_visited(&self, seen: impl Fn(&Goal) -> bool) -> CandidateSet {
        let candidates: Vec<Candidate> = self
            .candidates
            .iter()
            .filter(|c| c.action.is_false() || !seen(&c.next_goal))
            .cloned()
            .collect();
        if self.forced && candidates.is_empty() {
            return CandidateSet {
                goal: self.goal.clone(),
                candidates: vec![false_candidate()],
                include_false: false,
                forced: true,
            };
        }
        CandidateSet {
            goal: self.goal.clone(),
            candidates,
            include_false: self.include_false,
            forced: self.forced,
        }
    }
}

fn false_candidate() -> Candidate {
    Candidate {
        action: Action::False,
        next_goal: Goal::False,
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CandidateOptions {
    /// Append the synthetic `False` action to every stochastic choice.
    pub include_false: bool,
    pub occurs_check: bool,
    /// Clauses hidden from resolution (e.g. a training triple's own fact).
    pub banned: Vec<ClauseId>,
}

impl CandidateOptions {
    pub fn with_false() -> Self {
        CandidateOptions {
            include_false: true,
            ..Default::default()
        }
    }
}

/// Enumerates the resolvents of `goal`'s leftmost atom.
///
/// Program clauses are standardized apart starting at `goal.next_var()`,
/// which makes the result a pure function of its inputs. Terminal goals have
/// no candidates.
pub fn candidate_next_goals(goal: &Goal, program: &Program, opts: &CandidateOptions) -> CandidateSet {
    let mut set = CandidateSet {
        goal: goal.clone(),
        candidates: Vec::new(),
        include_false: false,
        forced: false,
    };
    let Some(first) = goal.leftmost() else {
        return set;
    };
    let rest = &goal.atoms()[1..];

    if let Some(b) = Builtin::lookup(program, first) {
        let solutions = builtins::solve(program, b, first, opts.occurs_check);
        let stochastic = solutions.len() > 1;
        set.candidates = solutions
            .into_iter()
            .enumerate()
            .map(|(choice, mgu)| Candidate {
                next_goal: mgu.apply_goal(&Goal::Conj(rest.to_vec())),
                action: Action::Builtin { choice, mgu },
            })
            .collect();
        if stochastic {
            if opts.include_false {
                set.candidates.push(false_candidate());
                set.include_false = true;
            }
        } else {
            set.forced = true;
            if set.candidates.is_empty() {
                set.candidates.push(false_candidate());
            }
        }
        return set;
    }

    let start = goal.next_var();
    for &id in program.clauses_for(first.predicate) {
        if opts.banned.contains(&id) {
            continue;
        }
        let mut counter = VarCounter::starting_at(start);
        let clause = rename_apart(program.clause(id), &mut counter);
        if let Some(mgu) = unify(first, &clause.head, opts.occurs_check) {
            let next_goal = splice(&clause, rest, &mgu);
            set.candidates.push(Candidate {
                action: Action::Clause { id, mgu },
                next_goal,
            });
        }
    }
    if opts.include_false {
        set.candidates.push(false_candidate());
        set.include_false = true;
    }
    set
}

fn splice(clause: &Clause, rest: &[crate::logic::Atom], mgu: &Substitution) -> Goal {
    let atoms = clause
        .body
        .iter()
        .chain(rest.iter())
        .map(|a| mgu.apply_atom(a))
        .collect();
    Goal::new(atoms)
}

/// One resolution step: the leftmost atom of `goal` is replaced by the body
/// of `clause` (a program clause, standardized apart from `goal` exactly as
/// [`candidate_next_goals`] does) and `mgu` is applied to the result.
///
/// `mgu` must unify the leftmost atom with the renamed head; violating that is
/// a programming error and panics in debug builds.
pub fn resolve_step(goal: &Goal, clause: &Clause, mgu: &Substitution) -> Goal {
    let Some(first) = goal.leftmost() else {
        return goal.clone();
    };
    let mut counter = VarCounter::starting_at(goal.next_var());
    let renamed = rename_apart(clause, &mut counter);
    debug_assert_eq!(
        mgu.apply_atom(first),
        mgu.apply_atom(&renamed.head),
        "substitution does not unify the selected atom with the clause head"
    );
    splice(&renamed, &goal.atoms()[1..], mgu)
}

/// Recomputes a candidate's successor from its action.
pub fn apply_action(goal: &Goal, action: &Action, program: &Program) -> Goal {
    match action {
        Action::Clause { id, mgu } => resolve_step(goal, program.clause(*id), mgu),
        Action::Builtin { mgu, .. } => mgu.apply_goal(&Goal::Conj(goal.atoms()[1..].to_vec())),
        Action::False => Goal::False,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_program, parse_query};

    const GEO: &str = "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).\n\
                       neighOf(it,fr).\nlocIn(fr,eu).\nlocIn(tr,gr).\nlocIn(gr,eu).\n";

    #[test]
    fn geo_candidates_include_rule_and_false() {
        let mut p = parse_program(GEO).unwrap();
        let g = parse_query("locIn(it,eu)", &mut p).unwrap();
        let set = candidate_next_goals(&g, &p, &CandidateOptions::with_false());
        assert_eq!(set.len(), 2);
        assert_eq!(set.candidates[0].action.clause_id(), Some(ClauseId(0)));
        let expected = parse_query("neighOf(it,Z), locIn(Z,eu)", &mut p).unwrap();
        assert_eq!(set.candidates[0].next_goal, expected);
        assert!(set.candidates[1].action.is_false());
    }

    #[test]
    fn false_action_program_candidates() {
        let mut p = parse_program("locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).\nneighOf(tr,gr).\nlocIn(gr,eu).\n").unwrap();
        let g = parse_query("locIn(tr,eu)", &mut p).unwrap();
        let set = candidate_next_goals(&g, &p, &CandidateOptions::with_false());
        assert_eq!(set.len(), 2);
        let Action::Clause { id, mgu } = &set.candidates[0].action else {
            panic!()
        };
        assert_eq!(*id, ClauseId(0));
        let tr = crate::logic::Term::Const(p.symbols.lookup("tr").unwrap());
        assert_eq!(mgu.get(crate::logic::Var(0)), Some(&tr));
        assert!(set.candidates[1].action.is_false());
    }

    #[test]
    fn no_unifiable_head_gives_only_false() {
        let mut p = parse_program("q(a).").unwrap();
        let g = parse_query("p(a)", &mut p).unwrap();
        assert!(candidate_next_goals(&g, &p, &CandidateOptions::default()).is_empty());
        let set = candidate_next_goals(&g, &p, &CandidateOptions::with_false());
        assert_eq!(set.len(), 1);
        assert!(set.candidates[0].action.is_false());
    }

    #[test]
    fn resolve_step_examples() {
        let mut p = parse_program(GEO).unwrap();
        let g = parse_query("locIn(it,eu)", &mut p).unwrap();
        let it = crate::logic::Term::Const(p.symbols.lookup("it").unwrap());
        let eu = crate::logic::Term::Const(p.symbols.lookup("eu").unwrap());
        use crate::logic::Var;
        let mgu = Substitution::from_pairs([(Var(0), it), (Var(1), eu)]);
        let next = resolve_step(&g, &p.clauses()[0], &mgu);
        assert_eq!(next, parse_query("neighOf(it,Z), locIn(Z,eu)", &mut p).unwrap());

        let mut p = parse_program("p(a). p(X) :- q(X), r(X).").unwrap();
        let g = parse_query("p(a)", &mut p).unwrap();
        assert!(resolve_step(&g, &p.clauses()[0], &Substitution::new()).is_true());
        let g = parse_query("p(X)", &mut p).unwrap();
        // the renamed clause variable is Var(1); bind it to the goal variable
        let mgu = Substitution::from_pairs([(Var(1), crate::logic::Term::Var(Var(0)))]);
        let next = resolve_step(&g, &p.clauses()[1], &mgu);
        assert_eq!(next, parse_query("q(X), r(X)", &mut p).unwrap());
    }

    #[test]
    fn candidates_cohere_with_resolve_step() {
        let mut p = parse_program(GEO).unwrap();
        for q in [
            "locIn(it,eu)",
            "locIn(X,eu)",
            "neighOf(it,Y), locIn(Y,eu)",
            "locIn(A,B)",
        ] {
            let g = parse_query(q, &mut p).unwrap();
            let set = candidate_next_goals(&g, &p, &CandidateOptions::with_false());
            for c in &set.candidates {
                assert_eq!(apply_action(&g, &c.action, &p), c.next_goal);
            }
        }
    }

    #[test]
    fn builtins_reduce_deterministically() {
        let mut p = parse_program("r(1).").unwrap();
        let g = parse_query("X is 3 + 4 * 2, Y is X mod 10, Y =:= 1", &mut p).unwrap();
        let set = candidate_next_goals(&g, &p, &CandidateOptions::with_false());
        assert!(set.forced);
        assert_eq!(set.len(), 1);
        let g1 = &set.candidates[0].next_goal;
        assert_eq!(p.goal_to_string(g1), "_0 is (11 mod 10), _0 =:= 1");
        let s2 = candidate_next_goals(g1, &p, &CandidateOptions::with_false());
        let s3 = candidate_next_goals(&s2.candidates[0].next_goal, &p, &CandidateOptions::with_false());
        assert!(s3.forced && s3.candidates[0].next_goal.is_true());

        let bad = parse_query("X is a + 1", &mut p).unwrap();
        let set = candidate_next_goals(&bad, &p, &CandidateOptions::with_false());
        assert!(set.forced && set.candidates[0].action.is_false());

        let b = parse_query("between(0, 2, D)", &mut p).unwrap();
        let set = candidate_next_goals(&b, &p, &CandidateOptions::with_false());
        assert!(!set.forced);
        assert_eq!(set.len(), 4);
    }
}
