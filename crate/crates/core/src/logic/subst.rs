use std::collections::{BTreeMap, HashSet};

use super::term::{Atom, Goal, Term, Var};

/// A finite mapping from variables to terms, kept idempotent.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Substitution {
    bindings: BTreeMap<Var, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Var, Term)>) -> Self {
        let mut s = Substitution {
            bindings: pairs.into_iter().collect(),
        };
        s.normalize();
        s
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn get(&self, v: Var) -> Option<&Term> {
        self.bindings.get(&v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter()
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        if self.bindings.is_empty() {
            return t.clone();
        }
        t.map_vars(&mut |v| match self.bindings.get(&v) {
            Some(b) => b.clone(),
            None => Term::Var(v),
        })
    }

    pub fn apply_atom(&self, a: &Atom) -> Atom {
        Atom {
            predicate: a.predicate,
            args: a.args.iter().map(|t| self.apply_term(t)).collect(),
        }
    }

    /// Applies to every atom and re-canonicalizes.
    pub fn apply_goal(&self, g: &Goal) -> Goal {
        match g {
            Goal::False => Goal::False,
            Goal::Conj(atoms) => Goal::new(atoms.iter().map(|a| self.apply_atom(a)).collect()),
        }
    }

    /// `apply(compose(a, b), t) == apply(b, apply(a, t))`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut bindings: BTreeMap<Var, Term> = self
            .bindings
            .iter()
            .map(|(v, t)| (*v, other.apply_term(t)))
            .filter(|(v, t)| *t != Term::Var(*v))
            .collect();
        for (v, t) in &other.bindings {
            bindings.entry(*v).or_insert_with(|| t.clone());
        }
        Substitution { bindings }
    }

    /// Restricts the domain to `vars`.
    pub fn restrict(&self, keep: impl Fn(Var) -> bool) -> Substitution {
        Substitution {
            bindings: self
                .bindings
                .iter()
                .filter(|(v, _)| keep(**v))
                .map(|(v, t)| (*v, t.clone()))
                .collect(),
        }
    }

    /// Resolves triangular bindings so that no bound variable occurs in any
    /// binding's right-hand side. Cyclic bindings (possible without the occurs
    /// check) are left unexpanded at the point of recurrence.
    pub(crate) fn normalize(&mut self) {
        let keys: Vec<Var> = self.bindings.keys().copied().collect();
        let mut resolved = BTreeMap::new();
        for v in keys {
            let mut visiting = HashSet::new();
            visiting.insert(v);
            let t = self.bindings[&v].clone();
            resolved.insert(v, self.deref_deep(&t, &mut visiting));
        }
        resolved.retain(|v, t| *t != Term::Var(*v));
        self.bindings = resolved;
    }

    fn deref_deep(&self, t: &Term, visiting: &mut HashSet<Var>) -> Term {
        match t {
            Term::Var(v) => match self.bindings.get(v) {
                Some(b) if !visiting.contains(v) => {
                    visiting.insert(*v);
                    let r = self.deref_deep(&b.clone(), visiting);
                    visiting.remove(v);
                    r
                }
                _ => t.clone(),
            },
            Term::Compound(s, args) => Term::Compound(*s, args.iter().map(|a| self.deref_deep(a, visiting)).collect()),
            _ => t.clone(),
        }
    }
}

/// Most general unifier of two atoms, or `None` on predicate/arity mismatch or clash.
pub fn unify(a: &Atom, b: &Atom, occurs_check: bool) -> Option<Substitution> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let mut u = Unifier {
        bindings: BTreeMap::new(),
        occurs_check,
    };
    for (x, y) in a.args.iter().zip(&b.args) {
        if !u.unify(x, y) {
            return None;
        }
    }
    let mut s = Substitution { bindings: u.bindings };
    s.normalize();
    Some(s)
}

/// Unifies two terms (used by the `=` built-in).
pub fn unify_terms(x: &Term, y: &Term, occurs_check: bool) -> Option<Substitution> {
    let mut u = Unifier {
        bindings: BTreeMap::new(),
        occurs_check,
    };
    if !u.unify(x, y) {
        return None;
    }
    let mut s = Substitution { bindings: u.bindings };
    s.normalize();
    Some(s)
}

struct Unifier {
    bindings: BTreeMap<Var, Term>,
    occurs_check: bool,
}

impl Unifier {
    fn walk(&self, t: &Term) -> Term {
        let mut cur = t.clone();
        while let Term::Var(v) = cur {
            match self.bindings.get(&v) {
                Some(b) => cur = b.clone(),
                None => break,
            }
        }
        cur
    }

    fn occurs(&self, v: Var, t: &Term) -> bool {
        match self.walk(t) {
            Term::Var(w) => w == v,
            Term::Compound(_, args) => args.iter().any(|a| self.occurs(v, a)),
            _ => false,
        }
    }

    fn unify(&mut self, x: &Term, y: &Term) -> bool {
        let mut stack = vec![(x.clone(), y.clone())];
        while let Some((l, r)) = stack.pop() {
            let l = self.walk(&l);
            let r = self.walk(&r);
            match (&l, &r) {
                (Term::Var(a), Term::Var(b)) if a == b => {}
                (Term::Var(a), Term::Var(b)) => {
                    // bind the younger variable so older (query-side) names survive
                    let (from, to) = if a > b { (*a, r) } else { (*b, l) };
                    self.bindings.insert(from, to);
                }
                (Term::Var(a), _) => {
                    if self.occurs_check && self.occurs(*a, &r) {
                        return false;
                    }
                    self.bindings.insert(*a, r);
                }
                (_, Term::Var(b)) => {
                    if self.occurs_check && self.occurs(*b, &l) {
                        return false;
                    }
                    self.bindings.insert(*b, l);
                }
                (Term::Compound(f, fa), Term::Compound(g, ga)) => {
                    if f != g || fa.len() != ga.len() {
                        return false;
                    }
                    stack.extend(fa.iter().cloned().zip(ga.iter().cloned()));
                }
                _ => {
                    if l != r {
                        return false;
                    }
                }
            }
        }
        true
    }
}
