use std::collections::HashMap;
use std::fmt::Write as _;

use super::term::{Atom, Clause, ClauseId, Goal, PayloadId, Symbol, Term};
use crate::error::{Error, Result};

pub const LIST_CONS: &str = ".";
pub const LIST_NIL: &str = "[]";

/// Infix operators understood by the reader and printer.
pub(crate) const COMPARISON_OPS: &[&str] = &["is", "=:=", "=\\=", "<", ">", "=<", ">=", "="];
pub(crate) const ADDITIVE_OPS: &[&str] = &["+", "-"];
pub(crate) const MULTIPLICATIVE_OPS: &[&str] = &["*", "//", "mod"];

/// Interned names. Integer literals get a symbol of their decimal text as
/// well, so numeric entity ids can carry their own embedding.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    ids: HashMap<String, Symbol>,
    ints: HashMap<i64, Symbol>,
    payload_names: Vec<String>,
    payload_ids: HashMap<String, PayloadId>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(&s) = self.ids.get(name) {
            return s;
        }
        let s = Symbol(self.names.len() as u32);
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), s);
        s
    }

    pub fn intern_int(&mut self, v: i64) -> Symbol {
        let s = self.intern(&v.to_string());
        self.ints.insert(v, s);
        s
    }

    pub fn intern_payload(&mut self, name: &str) -> PayloadId {
        if let Some(&p) = self.payload_ids.get(name) {
            return p;
        }
        let p = PayloadId(self.payload_names.len() as u32);
        self.payload_names.push(name.to_string());
        self.payload_ids.insert(name.to_string(), p);
        p
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        self.ids.get(name).copied()
    }

    pub fn int_symbol(&self, v: i64) -> Option<Symbol> {
        self.ints.get(&v).copied()
    }

    pub fn payload(&self, name: &str) -> Option<PayloadId> {
        self.payload_ids.get(name).copied()
    }

    pub fn name(&self, s: Symbol) -> &str {
        self.names.get(s.0 as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn payload_name(&self, p: PayloadId) -> &str {
        self.payload_names.get(p.0 as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn num_payloads(&self) -> usize {
        self.payload_names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    // ---- printing ----

    pub fn term_to_string(&self, t: &Term) -> String {
        let mut s = String::new();
        self.write_term(&mut s, t, None);
        s
    }

    pub fn atom_to_string(&self, a: &Atom) -> String {
        let mut s = String::new();
        self.write_atom(&mut s, a, None);
        s
    }

    pub fn goal_to_string(&self, g: &Goal) -> String {
        match g {
            Goal::False => "false".to_string(),
            Goal::Conj(atoms) if atoms.is_empty() => "true".to_string(),
            Goal::Conj(atoms) => atoms
                .iter()
                .map(|a| self.atom_to_string(a))
                .collect::<Vec<_>>()
                .join(", "),
        }
    }

    pub fn clause_to_string(&self, c: &Clause) -> String {
        let mut s = String::new();
        let names = Some(c.var_names.as_slice());
        self.write_atom(&mut s, &c.head, names);
        if !c.body.is_empty() {
            s.push_str(" :- ");
            for (i, b) in c.body.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                self.write_atom(&mut s, b, names);
            }
        }
        s.push('.');
        s
    }

    fn write_atom(&self, out: &mut String, a: &Atom, names: Option<&[String]>) {
        let name = self.name(a.predicate);
        if a.args.len() == 2 && COMPARISON_OPS.contains(&name) {
            self.write_term(out, &a.args[0], names);
            let _ = write!(out, " {name} ");
            self.write_term(out, &a.args[1], names);
            return;
        }
        self.write_functor(out, name);
        if !a.args.is_empty() {
            self.write_args(out, &a.args, names);
        }
    }

    fn write_functor(&self, out: &mut String, name: &str) {
        let plain = name.chars().next().is_some_and(|c| c.is_ascii_lowercase())
            && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if plain || name == LIST_NIL {
            out.push_str(name);
        } else {
            let _ = write!(out, "'{}'", name.replace('\'', "\\'"));
        }
    }

    fn write_args(&self, out: &mut String, args: &[Term], names: Option<&[String]>) {
        out.push('(');
        for (i, t) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            self.write_term(out, t, names);
        }
        out.push(')');
    }

    fn write_term(&self, out: &mut String, t: &Term, names: Option<&[String]>) {
        match t {
            Term::Const(s) => {
                let name = self.name(*s);
                if name.parse::<i64>().is_ok() {
                    // a constant whose name looks numeric must not re-read as an integer
                    let _ = write!(out, "'{name}'");
                } else {
                    self.write_functor(out, name);
                }
            }
            Term::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Term::Var(v) => match names.and_then(|n| n.get(v.0 as usize)) {
                Some(n) => out.push_str(n),
                None => {
                    let _ = write!(out, "{v}");
                }
            },
            Term::Payload(p) => {
                let _ = write!(out, "${}", self.payload_name(*p));
            }
            Term::Compound(f, args) => {
                let name = self.name(*f);
                if name == LIST_CONS && args.len() == 2 {
                    self.write_list(out, t, names);
                } else if args.len() == 2
                    && (ADDITIVE_OPS.contains(&name)
                        || MULTIPLICATIVE_OPS.contains(&name)
                        || COMPARISON_OPS.contains(&name))
                {
                    out.push('(');
                    self.write_term(out, &args[0], names);
                    let _ = write!(out, " {name} ");
                    self.write_term(out, &args[1], names);
                    out.push(')');
                } else {
                    self.write_functor(out, name);
                    self.write_args(out, args, names);
                }
            }
        }
    }

    fn write_list(&self, out: &mut String, t: &Term, names: Option<&[String]>) {
        out.push('[');
        let mut cur = t;
        let mut first = true;
        loop {
            match cur {
                Term::Compound(f, args) if self.name(*f) == LIST_CONS && args.len() == 2 => {
                    if !first {
                        out.push_str(", ");
                    }
                    first = false;
                    self.write_term(out, &args[0], names);
                    cur = &args[1];
                }
                Term::Const(s) if self.name(*s) == LIST_NIL => break,
                other => {
                    out.push('|');
                    self.write_term(out, other, names);
                    break;
                }
            }
        }
        out.push(']');
    }
}

/// A definite logic program with a per-predicate clause index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub symbols: SymbolTable,
    clauses: Vec<Clause>,
    index: HashMap<Symbol, Vec<ClauseId>>,
    arities: HashMap<Symbol, usize>,
}

impl Default for Program {
    fn default() -> Self {
        Self::new()
    }
}

impl Program {
    pub fn new() -> Self {
        Program::with_symbols(SymbolTable::new())
    }

    pub fn with_symbols(mut symbols: SymbolTable) -> Self {
        symbols.intern(LIST_NIL);
        symbols.intern(LIST_CONS);
        let mut arities = HashMap::new();
        arities.insert(symbols.intern(LIST_CONS), 2);
        Program {
            symbols,
            clauses: Vec::new(),
            index: HashMap::new(),
            arities,
        }
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id.0]
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Clause ids whose head predicate is `p`, ascending.
    pub fn clauses_for(&self, p: Symbol) -> &[ClauseId] {
        self.index.get(&p).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn arity(&self, s: Symbol) -> Option<usize> {
        self.arities.get(&s).copied()
    }

    /// Largest arity of any predicate or functor.
    pub fn max_arity(&self) -> usize {
        self.arities.values().copied().max().unwrap_or(0)
    }

    /// Records that `s` is used with `arity`, failing on conflict.
    pub(crate) fn check_arity(&mut self, s: Symbol, arity: usize) -> Result<()> {
        match self.arities.get(&s) {
            Some(&a) if a != arity => Err(Error::ArityConflict {
                symbol: self.symbols.name(s).to_string(),
                expected: a,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.arities.insert(s, arity);
                Ok(())
            }
        }
    }

    pub(crate) fn record_term_arities(&mut self, t: &Term) -> Result<()> {
        if let Term::Compound(f, args) = t {
            self.check_arity(*f, args.len())?;
            for a in args {
                self.record_term_arities(a)?;
            }
        }
        Ok(())
    }

    pub(crate) fn record_atom_arities(&mut self, a: &Atom) -> Result<()> {
        self.check_arity(a.predicate, a.args.len())?;
        for t in &a.args {
            self.record_term_arities(t)?;
        }
        Ok(())
    }

    /// Appends a clause, assigning the next dense id.
    pub fn add_clause(&mut self, head: Atom, body: Vec<Atom>, var_names: Vec<String>) -> Result<ClauseId> {
        self.record_atom_arities(&head)?;
        for b in &body {
            self.record_atom_arities(b)?;
        }
        let id = ClauseId(self.clauses.len());
        self.index.entry(head.predicate).or_default().push(id);
        self.clauses.push(Clause {
            id,
            head,
            body,
            var_names,
        });
        Ok(id)
    }

    /// Ground fact shorthand used by dataset loaders.
    pub fn add_fact(&mut self, predicate: &str, args: &[&str]) -> Result<ClauseId> {
        let p = self.symbols.intern(predicate);
        let args = args.iter().map(|a| self.constant(a)).collect();
        self.add_clause(Atom::new(p, args), Vec::new(), Vec::new())
    }

    /// A constant term for `name`; decimal names become integers.
    pub fn constant(&mut self, name: &str) -> Term {
        match name.parse::<i64>() {
            Ok(v) => {
                self.symbols.intern_int(v);
                Term::Int(v)
            }
            Err(_) => Term::Const(self.symbols.intern(name)),
        }
    }

    /// The term `constant(name)` would produce, if its symbol is already interned.
    pub fn lookup_constant(&self, name: &str) -> Option<Term> {
        match name.parse::<i64>() {
            Ok(v) => Some(Term::Int(v)),
            Err(_) => self.symbols.lookup(name).map(Term::Const),
        }
    }

    /// Renders the program in its source syntax; parsing the output gives back an equal program.
    pub fn to_source(&self) -> String {
        let mut s = String::new();
        for c in &self.clauses {
            s.push_str(&self.symbols.clause_to_string(c));
            s.push('\n');
        }
        s
    }

    pub fn atom_to_string(&self, a: &Atom) -> String {
        self.symbols.atom_to_string(a)
    }

    pub fn goal_to_string(&self, g: &Goal) -> String {
        self.symbols.goal_to_string(g)
    }

    pub fn clause_to_string(&self, c: &Clause) -> String {
        self.symbols.clause_to_string(c)
    }
}
