use std::collections::HashMap;
use std::fmt;

/// Interned name of a predicate, functor or constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

/// Opaque handle to an external feature vector (an image, a sensor reading).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PayloadId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Symbol),
    Int(i64),
    Var(Var),
    Compound(Symbol, Vec<Term>),
    Payload(PayloadId),
}

impl Term {
    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Compound(_, args) => args.iter().all(Term::is_ground),
            _ => true,
        }
    }

    pub fn contains_var(&self, v: Var) -> bool {
        match self {
            Term::Var(w) => *w == v,
            Term::Compound(_, args) => args.iter().any(|a| a.contains_var(v)),
            _ => false,
        }
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Term::Var(v) => f(*v),
            Term::Compound(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
            _ => {}
        }
    }

    pub fn map_vars(&self, f: &mut impl FnMut(Var) -> Term) -> Term {
        match self {
            Term::Var(v) => f(*v),
            Term::Compound(s, args) => Term::Compound(*s, args.iter().map(|a| a.map_vars(f)).collect()),
            t => t.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: Symbol, args: Vec<Term>) -> Self {
        Atom { predicate, args }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Term::is_ground)
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        self.args.iter().for_each(|a| a.for_each_var(f));
    }

    pub fn map_vars(&self, f: &mut impl FnMut(Var) -> Term) -> Atom {
        Atom {
            predicate: self.predicate,
            args: self.args.iter().map(|a| a.map_vars(f)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub id: ClauseId,
    pub head: Atom,
    pub body: Vec<Atom>,
    /// Source names of the clause variables; `Var(i)` is `var_names[i]`.
    pub var_names: Vec<String>,
}

impl Clause {
    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    pub fn num_vars(&self) -> u32 {
        self.var_names.len() as u32
    }
}

/// Monotone source of fresh variables, owned by one derivation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VarCounter(pub u32);

impl VarCounter {
    pub fn starting_at(next: u32) -> Self {
        VarCounter(next)
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var(self.0);
        self.0 += 1;
        v
    }

    pub fn peek(&self) -> u32 {
        self.0
    }
}

/// Standardizes a clause apart: its variables are shifted to fresh ids issued by `counter`.
pub fn rename_apart(clause: &Clause, counter: &mut VarCounter) -> Clause {
    let base = counter.0;
    counter.0 += clause.num_vars();
    let mut shift = |v: Var| Term::Var(Var(v.0 + base));
    Clause {
        id: clause.id,
        head: clause.head.map_vars(&mut shift),
        body: clause.body.iter().map(|a| a.map_vars(&mut shift)).collect(),
        var_names: clause.var_names.clone(),
    }
}

/// An SLD goal in canonical form.
///
/// Variables are renumbered `0..k` by first occurrence, left to right, so
/// equality and hashing hold up to consistent renaming. The empty
/// conjunction is the `True` terminal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Goal {
    Conj(Vec<Atom>),
    False,
}

impl Goal {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Goal::Conj(canonicalize(atoms))
    }

    pub fn truth() -> Self {
        Goal::Conj(Vec::new())
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Goal::Conj(a) if a.is_empty())
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Goal::False)
    }

    pub fn is_terminal(&self) -> bool {
        self.is_true() || self.is_false()
    }

    pub fn atoms(&self) -> &[Atom] {
        match self {
            Goal::Conj(a) => a,
            Goal::False => &[],
        }
    }

    pub fn leftmost(&self) -> Option<&Atom> {
        self.atoms().first()
    }

    /// One past the largest variable id, i.e. the number of distinct variables
    /// for a canonical goal.
    pub fn next_var(&self) -> u32 {
        let mut next = 0;
        for a in self.atoms() {
            a.for_each_var(&mut |v| next = next.max(v.0 + 1));
        }
        next
    }

    /// Stable 64-bit fingerprint used for visited-goal sets.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// Renumbers variables by first occurrence.
pub fn canonicalize(atoms: Vec<Atom>) -> Vec<Atom> {
    let mut map: HashMap<Var, Var> = HashMap::new();
    let mut already = true;
    for a in &atoms {
        a.for_each_var(&mut |v| {
            let next = Var(map.len() as u32);
            let got = *map.entry(v).or_insert(next);
            if got != v {
                already = false;
            }
        });
    }
    if already {
        return atoms;
    }
    atoms.iter().map(|a| a.map_vars(&mut |v| Term::Var(map[&v]))).collect()
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_{}", self.0)
    }
}
