//! Proof trees of successful derivations, in indented text and JSON.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{ClauseId, Goal, Program, Substitution};
use crate::sld::{
    candidate_next_goals, replay, step_probabilities, Action, CandidateOptions, Derivation, Outcome, ResolutionStep,
    TransitionModel,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofNode {
    /// The resolved atom, instantiated by the final answer.
    pub atom: String,
    /// `clause:N` or `builtin:k`.
    pub action: String,
    /// Source text of the clause, when the action used one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clause: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<ProofNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proof {
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// One tree per query atom.
    pub roots: Vec<ProofNode>,
}

fn parse_action(label: &str) -> Result<Action> {
    let bad = || Error::Validation(format!("unknown action label `{label}`"));
    let (kind, n) = label.split_once(':').ok_or_else(bad)?;
    let n: usize = n.parse().map_err(|_| bad())?;
    match kind {
        "clause" => Ok(Action::Clause {
            id: ClauseId(n),
            mgu: Substitution::new(),
        }),
        "builtin" => Ok(Action::Builtin {
            choice: n,
            mgu: Substitution::new(),
        }),
        _ => Err(bad()),
    }
}

fn clause_text(program: &Program, action: &Action) -> Option<String> {
    action
        .clause_id()
        .map(|id| program.clause_to_string(program.clause(id)))
}

impl Proof {
    /// Proof of `query` by the successful action sequence `actions`.
    pub fn from_actions(query: &Goal, actions: &[Action], program: &Program) -> Result<Self> {
        let r = replay(query.atoms(), program, actions, false)?;
        if !r.final_goal.is_true() {
            return Err(Error::Validation("only successful derivations have proof trees".into()));
        }
        let mut it = r.selected.into_iter();
        let mut build = |n: usize| -> Result<Vec<ProofNode>> { take(&mut it, n, program) };
        let roots = build(query.atoms().len())?;
        Ok(Proof {
            query: program.goal_to_string(query),
            probability: None,
            roots,
        })
    }

    pub fn from_derivation(d: &Derivation, program: &Program) -> Result<Self> {
        if !d.is_success() {
            return Err(Error::Validation(format!("derivation ended with {:?}", d.outcome)));
        }
        let actions: Vec<Action> = d.actions().cloned().collect();
        Self::from_actions(&d.query, &actions, program)
    }

    pub fn with_probability(mut self, p: f64) -> Self {
        self.probability = Some(p);
        self
    }

    /// The action sequence in resolution order (pre-order over the trees).
    pub fn actions(&self) -> Result<Vec<Action>> {
        fn walk(n: &ProofNode, out: &mut Vec<Action>) -> Result<()> {
            out.push(parse_action(&n.action)?);
            n.children.iter().try_for_each(|c| walk(c, out))
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, &mut out)?;
        }
        Ok(out)
    }

    /// Replays the tree against `program`, failing unless it proves `query`.
    pub fn check(&self, query: &Goal, program: &Program) -> Result<()> {
        let r = replay(query.atoms(), program, &self.actions()?, false)?;
        if r.final_goal.is_true() {
            Ok(())
        } else {
            Err(Error::Validation("proof tree leaves goals open".into()))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// `query: ...`, optional `probability: ...`, then one line per node
    /// indented two spaces per level: `atom <- label`.
    pub fn to_text(&self) -> String {
        fn walk(n: &ProofNode, depth: usize, out: &mut String) {
            out.push_str(&format!("{}{} <- {}\n", "  ".repeat(depth), n.atom, n.action));
            for c in &n.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = format!("query: {}\n", self.query);
        if let Some(p) = self.probability {
            out.push_str(&format!("probability: {p:?}\n"));
        }
        for r in &self.roots {
            walk(r, 0, &mut out);
        }
        out
    }

    /// Inverse of [`Proof::to_text`]; clause texts are restored from `program`.
    pub fn from_text(text: &str, program: &Program) -> Result<Self> {
        let mut query = None;
        let mut probability = None;
        let mut flat: Vec<(usize, ProofNode)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: &str| Error::Data {
                line: i + 1,
                msg: msg.to_string(),
            };
            if line.trim().is_empty() {
                continue;
            }
            if let Some(q) = line.strip_prefix("query: ") {
                query = Some(q.to_string());
                continue;
            }
            if let Some(p) = line.strip_prefix("probability: ") {
                probability = Some(p.trim().parse::<f64>().map_err(|_| err("bad probability"))?);
                continue;
            }
            let body = line.trim_start_matches(' ');
            let indent = line.len() - body.len();
            if indent % 2 != 0 {
                return Err(err("odd indentation"));
            }
            let (atom, label) = body
                .rsplit_once(" <- ")
                .ok_or_else(|| err("expected `atom <- action`"))?;
            let action = parse_action(label).map_err(|_| err("unknown action label"))?;
            if let Action::Clause { id, .. } = &action {
                if id.0 >= program.len() {
                    return Err(err("clause id out of range"));
                }
            }
            flat.push((
                indent / 2,
                ProofNode {
                    atom: atom.to_string(),
                    action: label.to_string(),
                    clause: clause_text(program, &action),
                    children: Vec::new(),
                },
            ));
        }
        let query = query.ok_or_else(|| Error::Data {
            line: 1,
            msg: "missing `query:` line".into(),
        })?;
        let mut pos = 0;
        let roots = nest(&flat, &mut pos, 0)?;
        Ok(Proof {
            query,
            probability,
            roots,
        })
    }
}

fn take(
    it: &mut impl Iterator<Item = (crate::logic::Atom, Action, usize)>,
    n: usize,
    program: &Program,
) -> Result<Vec<ProofNode>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (atom, action, nbody) = it
            .next()
            .ok_or_else(|| Error::Validation("derivation ended early".into()))?;
        let children = take(it, nbody, program)?;
        out.push(ProofNode {
            atom: program.atom_to_string(&atom),
            action: action.label(),
            clause: clause_text(program, &action),
            children,
        });
    }
    Ok(out)
}

fn nest(flat: &[(usize, ProofNode)], pos: &mut usize, depth: usize) -> Result<Vec<ProofNode>> {
    let mut out: Vec<ProofNode> = Vec::new();
    while *pos < flat.len() {
        let (d, node) = &flat[*pos];
        if *d < depth {
            break;
        }
        if *d > depth {
            return Err(Error::Validation(format!(
                "node `{}` is indented too deeply",
                node.atom
            )));
        }
        *pos += 1;
        let mut node = node.clone();
        node.children = nest(flat, pos, depth + 1)?;
        out.push(node);
    }
    Ok(out)
}

/// The `width` most probable successful derivations found by a beam search
/// over partial derivations, with their probabilities, most probable first.
pub fn beam_search(
    query: &Goal,
    program: &Program,
    model: &dyn TransitionModel,
    max_depth: usize,
    width: usize,
    banned: &[ClauseId],
) -> Result<Vec<(Derivation, f64)>> {
    let opts = CandidateOptions {
        banned: banned.to_vec(),
        ..CandidateOptions::with_false()
    };
    let mut beam: Vec<(Vec<ResolutionStep>, Goal, f64)> = vec![(Vec::new(), query.clone(), 1.0)];
    let mut done: Vec<(Derivation, f64)> = Vec::new();
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for (path, goal, p) in &beam {
            let set = candidate_next_goals(goal, program, &opts);
            let visited = |g: &Goal| g == query || path.iter().any(|s| s.next_goal() == g);
            let set = Arc::new(set.without_visited(visited));
            let probs = step_probabilities(model, &set)?;
            for (k, c) in set.candidates.iter().enumerate() {
                if c.next_goal.is_false() || probs[k] == 0.0 {
                    continue;
                }
                let mut path = path.clone();
                path.push(ResolutionStep {
                    candidates: set.clone(),
                    chosen: k,
                    prob: Some(probs[k]),
                });
                let q = p * probs[k];
                if c.next_goal.is_true() {
                    done.push((
                        Derivation {
                            query: query.clone(),
                            steps: path,
                            outcome: Outcome::True,
                        },
                        q,
                    ));
                } else {
                    next.push((path, c.next_goal.clone(), q));
                }
            }
        }
        next.sort_by(|a, b| b.2.total_cmp(&a.2));
        next.truncate(width);
        beam = next;
        if beam.is_empty() {
            break;
        }
    }
    done.sort_by(|a, b| b.1.total_cmp(&a.1));
    done.truncate(width);
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_program, parse_query};
    use crate::sld::{enumerate_derivations, EnumerateOptions, UniformModel};

    fn geo() -> Program {
        parse_program(
            "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).\n\
             neighOf(it,fr).\nlocIn(fr,eu).\n",
        )
        .unwrap()
    }

    #[test]
    fn export_round_trips_and_replays() {
        let mut p = geo();
        let q = parse_query("locIn(it,eu)", &mut p).unwrap();
        let ds = enumerate_derivations(&q, &p, 6, &EnumerateOptions::default()).unwrap();
        let d = ds.iter().find(|d| d.is_success()).unwrap();
        let proof = Proof::from_derivation(d, &p).unwrap();
        assert_eq!(proof.roots.len(), 1);
        assert_eq!(proof.roots[0].action, "clause:0");
        assert_eq!(proof.roots[0].children.len(), 2);
        assert_eq!(proof.roots[0].children[0].atom, "neighOf(it, fr)");
        proof.check(&q, &p).unwrap();

        let text = proof.to_text();
        assert_eq!(Proof::from_text(&text, &p).unwrap(), proof);
        let json = proof.to_json().unwrap();
        assert_eq!(Proof::from_json(&json).unwrap(), proof);

        let failed = ds.iter().find(|d| !d.is_success()).unwrap();
        assert!(Proof::from_derivation(failed, &p).is_err());
    }

    #[test]
    fn beam_finds_the_proof() {
        let mut p = geo();
        let q = parse_query("locIn(it,eu)", &mut p).unwrap();
        let found = beam_search(&q, &p, &UniformModel, 6, 8, &[]).unwrap();
        assert_eq!(found.len(), 1);
        // three choice points with clause candidates plus False
        let (d, prob) = &found[0];
        assert!(d.is_success());
        assert!(*prob > 0.0 && *prob < 1.0);
        Proof::from_derivation(d, &p).unwrap().check(&q, &p).unwrap();
    }
}
