//! Deterministic evaluable predicates: `is`, arithmetic comparison, `=` and `between`.

use crate::logic::{unify_terms, Atom, Program, Substitution, Term};

/// Upper bound on the values enumerated by `between/3` with an unbound third argument.
pub const MAX_BETWEEN_SPAN: i64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Is,
    ArithEq,
    ArithNe,
    Lt,
    Gt,
    Le,
    Ge,
    Unify,
    Between,
}

impl Builtin {
    pub fn lookup(program: &Program, atom: &Atom) -> Option<Builtin> {
        let name = program.symbols.name(atom.predicate);
        let b = match (name, atom.args.len()) {
            ("is", 2) => Builtin::Is,
            ("=:=", 2) => Builtin::ArithEq,
            ("=\\=", 2) => Builtin::ArithNe,
            ("<", 2) => Builtin::Lt,
            (">", 2) => Builtin::Gt,
            ("=<", 2) => Builtin::Le,
            (">=", 2) => Builtin::Ge,
            ("=", 2) => Builtin::Unify,
            ("between", 3) => Builtin::Between,
            _ => return None,
        };
        Some(b)
    }
}

/// Evaluates an arithmetic expression; `None` on unbound variables, non-numbers,
/// division by zero or overflow.
pub fn eval(program: &Program, t: &Term) -> Option<i64> {
    match t {
        Term::Int(v) => Some(*v),
        Term::Compound(f, args) if args.len() == 2 => {
            let l = eval(program, &args[0])?;
            let r = eval(program, &args[1])?;
            match program.symbols.name(*f) {
                "+" => l.checked_add(r),
                "-" => l.checked_sub(r),
                "*" => l.checked_mul(r),
                "//" => {
                    if r == 0 {
                        None
                    } else {
                        Some(l.div_euclid(r))
                    }
                }
                "mod" => {
                    if r == 0 {
                        None
                    } else {
                        Some(l.rem_euclid(r))
                    }
                }
                _ => None,
            }
        }
        _ => None,
    }
}

/// All solutions of a built-in call, in a fixed order. An ill-typed call has
/// no solutions.
pub fn solve(program: &Program, b: Builtin, atom: &Atom, occurs_check: bool) -> Vec<Substitution> {
    let args = &atom.args;
    let test = |ok: bool| if ok { vec![Substitution::new()] } else { Vec::new() };
    let compare = |f: fn(i64, i64) -> bool| match (eval(program, &args[0]), eval(program, &args[1])) {
        (Some(l), Some(r)) => test(f(l, r)),
        _ => Vec::new(),
    };
    match b {
        Builtin::Is => match eval(program, &args[1]) {
            Some(v) => unify_terms(&args[0], &Term::Int(v), occurs_check).into_iter().collect(),
            None => Vec::new(),
        },
        Builtin::ArithEq => compare(|l, r| l == r),
        Builtin::ArithNe => compare(|l, r| l != r),
        Builtin::Lt => compare(|l, r| l < r),
        Builtin::Gt => compare(|l, r| l > r),
        Builtin::Le => compare(|l, r| l <= r),
        Builtin::Ge => compare(|l, r| l >= r),
        Builtin::Unify => unify_terms(&args[0], &args[1], occurs_check).into_iter().collect(),
        Builtin::Between => {
            let (Some(lo), Some(hi)) = (eval(program, &args[0]), eval(program, &args[1])) else {
                return Vec::new();
            };
            match &args[2] {
                Term::Int(v) => test(lo <= *v && *v <= hi),
                Term::Var(v) => {
                    if hi < lo || hi - lo > MAX_BETWEEN_SPAN {
                        return Vec::new();
                    }
                    (lo..=hi)
                        .map(|k| Substitution::from_pairs([(*v, Term::Int(k))]))
                        .collect()
                }
                _ => Vec::new(),
            }
        }
    }
}
