//! Reader for the `.dpl` program syntax.
//!
//! Clauses are `Head :- B1, ..., Bm.` or `Head.`; `%` starts a line comment.
//! Lowercase identifiers are constants, functors and predicates; uppercase or
//! `_`-prefixed identifiers are variables (`_` alone is anonymous); integers
//! are constants; `$name` is a subsymbolic placeholder. Lists (`[H|T]`) and
//! the arithmetic/comparison operators used by the built-ins are supported.

use std::collections::HashMap;

use super::program::{Program, ADDITIVE_OPS, COMPARISON_OPS, LIST_CONS, LIST_NIL, MULTIPLICATIVE_OPS};
use super::term::{Atom, Goal, Term, Var};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Variable(String),
    Int(i64),
    Payload(String),
    Op(&'static str),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Bar,
    Comma,
    Neck,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

const SYMBOL_OPS: &[&str] = &["=:=", "=\\=", "=<", ">=", "//", "<", ">", "=", "+", "-", "*"];

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| Error::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            advance(1, &mut i, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: tl, col: tc });
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            if c.is_ascii_uppercase() || c == '_' {
                push(&mut out, Tok::Variable(word));
            } else if word == "is" {
                push(&mut out, Tok::Op("is"));
            } else if word == "mod" {
                push(&mut out, Tok::Op("mod"));
            } else {
                push(&mut out, Tok::Ident(word));
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let v = word
                .parse::<i64>()
                .map_err(|_| err(tl, tc, format!("integer literal `{word}` out of range")))?;
            push(&mut out, Tok::Int(v));
            continue;
        }
        if c == '$' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            if i == start {
                return Err(err(tl, tc, "empty payload name after `$`".into()));
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start + 1;
            push(&mut out, Tok::Payload(word));
            continue;
        }
        if c == '\'' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                match chars.get(i) {
                    None | Some('\n') => return Err(err(tl, tc, "unterminated quoted atom".into())),
                    Some('\\') if chars.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                        col += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                        col += 1;
                    }
                }
            }
            push(&mut out, Tok::Quoted(s));
            continue;
        }
        if c == ':' && chars.get(i + 1) == Some(&'-') {
            push(&mut out, Tok::Neck);
            advance(2, &mut i, &mut col);
            continue;
        }
        if c == '.' {
            let next = chars.get(i + 1);
            if next.is_none() || next.is_some_and(|n| n.is_whitespace() || *n == '%') {
                push(&mut out, Tok::End);
                advance(1, &mut i, &mut col);
                continue;
            }
            return Err(err(tl, tc, "unexpected `.`".into()));
        }
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '|' => Some(Tok::Bar),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = simple {
            push(&mut out, t);
            advance(1, &mut i, &mut col);
            continue;
        }
        if let Some(op) = SYMBOL_OPS.iter().find(|op| {
            let n = op.chars().count();
            chars[i..].iter().take(n).copied().eq(op.chars())
        }) {
            push(&mut out, Tok::Op(op));
            advance(op.chars().count(), &mut i, &mut col);
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    program: &'a mut Program,
    vars: HashMap<String, Var>,
    var_names: Vec<String>,
    eof: (usize, usize),
}

impl<'a> Parser<'a> {
    fn new(text: &str, program: &'a mut Program) -> Result<Self> {
        let toks = tokenize(text)?;
        let lines = text.lines().count().max(1);
        let last_len = text.lines().last().map(|l| l.chars().count()).unwrap_or(0);
        Ok(Parser {
            toks,
            pos: 0,
            program,
            vars: HashMap::new(),
            var_names: Vec::new(),
            eof: (lines, last_len + 1),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.eof)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        let (line, col) = self.here();
        Err(Error::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<()> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn reset_vars(&mut self) {
        self.vars.clear();
        self.var_names.clear();
    }

    fn variable(&mut self, name: &str) -> Term {
        if name == "_" {
            let v = Var(self.var_names.len() as u32);
            self.var_names.push("_".into());
            return Term::Var(v);
        }
        if let Some(&v) = self.vars.get(name) {
            return Term::Var(v);
        }
        let v = Var(self.var_names.len() as u32);
        self.var_names.push(name.to_string());
        self.vars.insert(name.to_string(), v);
        Term::Var(v)
    }

    fn binop(&mut self, op: &str, l: Term, r: Term) -> Term {
        let f = self.program.symbols.intern(op);
        Term::Compound(f, vec![l, r])
    }

    // expr700 := expr500 (cmp expr500)?
    fn expr700(&mut self) -> Result<Term> {
        let l = self.expr500()?;
        if let Some(Tok::Op(op)) = self.peek() {
            if COMPARISON_OPS.contains(op) {
                let op = *op;
                self.pos += 1;
                let r = self.expr500()?;
                return Ok(self.binop(op, l, r));
            }
        }
        Ok(l)
    }

    fn expr500(&mut self) -> Result<Term> {
        let mut l = self.expr400()?;
        while let Some(Tok::Op(op)) = self.peek() {
            if !ADDITIVE_OPS.contains(op) {
                break;
            }
            let op = *op;
            self.pos += 1;
            let r = self.expr400()?;
            l = self.binop(op, l, r);
        }
        Ok(l)
    }

    fn expr400(&mut self) -> Result<Term> {
        let mut l = self.primary()?;
        while let Some(Tok::Op(op)) = self.peek() {
            if !MULTIPLICATIVE_OPS.contains(op) {
                break;
            }
            let op = *op;
            self.pos += 1;
            let r = self.primary()?;
            l = self.binop(op, l, r);
        }
        Ok(l)
    }

    fn primary(&mut self) -> Result<Term> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of input");
        };
        match tok {
            Tok::Int(v) => {
                self.pos += 1;
                self.program.symbols.intern_int(v);
                Ok(Term::Int(v))
            }
            Tok::Op("-") if matches!(self.toks.get(self.pos + 1).map(|t| &t.tok), Some(Tok::Int(_))) => {
                self.pos += 1;
                let Some(Tok::Int(v)) = self.peek().cloned() else {
                    unreachable!()
                };
                self.pos += 1;
                self.program.symbols.intern_int(-v);
                Ok(Term::Int(-v))
            }
            Tok::Variable(name) => {
                self.pos += 1;
                Ok(self.variable(&name))
            }
            Tok::Payload(name) => {
                self.pos += 1;
                Ok(Term::Payload(self.program.symbols.intern_payload(&name)))
            }
            Tok::LParen => {
                self.pos += 1;
                let t = self.expr700()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::LBracket => self.list(),
            Tok::Ident(name) | Tok::Quoted(name) => {
                self.pos += 1;
                let s = self.program.symbols.intern(&name);
                if self.peek() == Some(&Tok::LParen) {
                    self.pos += 1;
                    let args = self.args()?;
                    Ok(Term::Compound(s, args))
                } else {
                    Ok(Term::Const(s))
                }
            }
            _ => self.error("expected a term"),
        }
    }

    fn args(&mut self) -> Result<Vec<Term>> {
        let mut args = vec![self.expr700()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.expr700()?);
        }
        self.expect(&Tok::RParen, "`,` or `)`")?;
        Ok(args)
    }

    fn list(&mut self) -> Result<Term> {
        self.expect(&Tok::LBracket, "`[`")?;
        let nil = Term::Const(self.program.symbols.intern(LIST_NIL));
        if self.peek() == Some(&Tok::RBracket) {
            self.pos += 1;
            return Ok(nil);
        }
        let mut items = vec![self.expr700()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            items.push(self.expr700()?);
        }
        let tail = if self.peek() == Some(&Tok::Bar) {
            self.pos += 1;
            self.expr700()?
        } else {
            nil
        };
        self.expect(&Tok::RBracket, "`]`")?;
        let cons = self.program.symbols.intern(LIST_CONS);
        Ok(items
            .into_iter()
            .rev()
            .fold(tail, |acc, item| Term::Compound(cons, vec![item, acc])))
    }

    fn atom(&mut self) -> Result<Atom> {
        let t = self.expr700()?;
        match t {
            Term::Const(s) => Ok(Atom::new(s, Vec::new())),
            Term::Compound(s, args) => Ok(Atom::new(s, args)),
            _ => self.error("expected an atom"),
        }
    }

    fn conjunction(&mut self) -> Result<Vec<Atom>> {
        let mut atoms = vec![self.atom()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            atoms.push(self.atom()?);
        }
        Ok(atoms)
    }

    fn clause(&mut self) -> Result<()> {
        self.reset_vars();
        let (line, col) = self.here();
        let head = self.atom()?;
        let body = if self.peek() == Some(&Tok::Neck) {
            self.pos += 1;
            self.conjunction()?
        } else {
            Vec::new()
        };
        self.expect(&Tok::End, "`.` at end of clause")?;
        let names = std::mem::take(&mut self.var_names);
        self.program.add_clause(head, body, names).map_err(|e| match e {
            Error::ArityConflict { .. } => e,
            other => Error::Syntax {
                line,
                col,
                msg: other.to_string(),
            },
        })?;
        Ok(())
    }
}

/// Parses a whole program.
pub fn parse_program(text: &str) -> Result<Program> {
    let mut program = Program::new();
    parse_into(text, &mut program)?;
    Ok(program)
}

/// Appends the clauses of `text` to an existing program.
pub fn parse_into(text: &str, program: &mut Program) -> Result<()> {
    let mut p = Parser::new(text, program)?;
    while p.peek().is_some() {
        p.clause()?;
    }
    Ok(())
}

/// A parsed query together with the source names of its variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Query {
    pub goal: Goal,
    pub var_names: Vec<String>,
}

/// Parses a comma-separated conjunction (an optional final `.` is allowed).
/// New symbols are interned into the program's table.
pub fn parse_query(text: &str, program: &mut Program) -> Result<Goal> {
    Ok(parse_query_named(text, program)?.goal)
}

pub fn parse_query_named(text: &str, program: &mut Program) -> Result<Query> {
    let mut p = Parser::new(text, program)?;
    if p.peek().is_none() {
        return Ok(Query {
            goal: Goal::truth(),
            var_names: Vec::new(),
        });
    }
    let atoms = p.conjunction()?;
    if p.peek() == Some(&Tok::End) {
        p.pos += 1;
    }
    if p.peek().is_some() {
        return p.error("trailing input after query");
    }
    for a in &atoms {
        if let Some(k) = p.program.arity(a.predicate) {
            if k != a.args.len() {
                log::warn!(
                    "query uses `{}` with arity {} but the program uses {}",
                    p.program.symbols.name(a.predicate),
                    a.args.len(),
                    k
                );
            }
        }
    }
    // variables are numbered by first occurrence while reading, so the goal is
    // already canonical and `var_names[i]` names `Var(i)`
    let var_names = std::mem::take(&mut p.var_names);
    Ok(Query {
        goal: Goal::new(atoms),
        var_names,
    })
}
