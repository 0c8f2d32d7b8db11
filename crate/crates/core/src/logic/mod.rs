//! Terms, clauses, substitutions, unification and the program reader.

mod parser;
mod program;
mod subst;
mod term;

pub use parser::{parse_into, parse_program, parse_query, parse_query_named, Query};
pub use program::{Program, SymbolTable, LIST_CONS, LIST_NIL};
pub use subst::{unify, unify_terms, Substitution};
pub use term::{canonicalize, rename_apart, Atom, Clause, ClauseId, Goal, PayloadId, Symbol, Term, Var, VarCounter};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn geo() -> Program {
        parse_program(
            "locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).\n\
             neighOf(it,fr).\nlocIn(fr,eu).\nlocIn(tr,gr).\nlocIn(gr,eu).\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_facts_and_indexes_them() {
        let p = parse_program("p(a). p(b).").unwrap();
        assert_eq!(p.len(), 2);
        let sym = p.symbols.lookup("p").unwrap();
        assert_eq!(p.clauses_for(sym), &[ClauseId(0), ClauseId(1)]);
        assert!(p.clauses().iter().all(Clause::is_fact));
    }

    #[test]
    fn parses_recursive_rule() {
        let p = parse_program("locIn(X,Y) :- neighOf(X,Z), locIn(Z,Y).").unwrap();
        assert_eq!(p.len(), 1);
        let c = &p.clauses()[0];
        assert_eq!(p.symbols.name(c.head.predicate), "locIn");
        assert_eq!(c.head.arity(), 2);
        assert_eq!(c.body.len(), 2);
        assert_eq!(c.var_names, vec!["X", "Y", "Z"]);
    }

    #[test]
    fn arity_conflict_is_reported() {
        match parse_program("p(a,b). p(c).") {
            Err(Error::ArityConflict { symbol, .. }) => assert_eq!(symbol, "p"),
            other => panic!("expected arity conflict, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_program("p(a).\nq(b :- r.") {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parses_the_addition_program() {
        let src = "mnist_addition([], [], [], 0).\n\
                   mnist_addition([], [], [1], 1).\n\
                   mnist_addition([HN1|TN1], [HN2|TN2],[HSUM|TSUM], CarryIn) :-\n\
                       Sum is HN1+HN2+CarryIn,\n\
                       HSUM is Sum mod 10,\n\
                       CarryOut is Sum // 10,\n\
                       mnist_addition(TN1, TN2, TSUM, CarryOut).\n";
        let p = parse_program(src).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.clauses()[2].body.len(), 4);
        let again = parse_program(&p.to_source()).unwrap();
        assert_eq!(again, p);
    }

    #[test]
    fn query_parsing() {
        let mut p = geo();
        let g = parse_query("locIn(it,eu)", &mut p).unwrap();
        assert_eq!(g.atoms().len(), 1);
        assert!(g.atoms()[0].is_ground());

        assert!(parse_query("", &mut p).unwrap().is_true());

        let q = parse_query_named("neighOf(it,Y), locIn(Y,eu)", &mut p).unwrap();
        assert_eq!(q.goal.atoms().len(), 2);
        assert_eq!(q.var_names, vec!["Y"]);
        assert_eq!(q.goal.atoms()[0].args[1], Term::Var(Var(0)));
        assert_eq!(q.goal.atoms()[1].args[0], Term::Var(Var(0)));
    }

    #[test]
    fn unknown_predicates_allowed_in_queries() {
        let mut p = geo();
        let g = parse_query("brandNew(x, Y)", &mut p).unwrap();
        assert_eq!(g.atoms().len(), 1);
    }

    #[test]
    fn unify_examples() {
        let mut p = Program::new();
        let a = parse_query("locatedIn(X, europe)", &mut p).unwrap();
        let b = parse_query("locatedIn(italy, Y)", &mut p).unwrap();
        // separate the two atoms' variables
        let b_atom = b.atoms()[0].map_vars(&mut |v| Term::Var(Var(v.0 + 10)));
        let s = unify(&a.atoms()[0], &b_atom, false).unwrap();
        let italy = Term::Const(p.symbols.lookup("italy").unwrap());
        let europe = Term::Const(p.symbols.lookup("europe").unwrap());
        assert_eq!(s.get(Var(0)), Some(&italy));
        assert_eq!(s.get(Var(10)), Some(&europe));
        assert_eq!(s.len(), 2);
        assert_eq!(s.apply_atom(&a.atoms()[0]), s.apply_atom(&b_atom));

        let pa = parse_query("p(a)", &mut p).unwrap().atoms()[0].clone();
        assert!(unify(&pa, &pa, false).unwrap().is_empty());
        let qa = parse_query("q(a)", &mut p).unwrap().atoms()[0].clone();
        assert!(unify(&pa, &qa, false).is_none());
    }

    #[test]
    fn occurs_check_is_opt_in() {
        let mut p = Program::new();
        let a = parse_query("p(X, X)", &mut p).unwrap().atoms()[0].clone();
        let b = parse_query("p(Y, f(Y))", &mut p).unwrap().atoms()[0].clone();
        let b = b.map_vars(&mut |v| Term::Var(Var(v.0 + 5)));
        assert!(unify(&a, &b, true).is_none());
        assert!(unify(&a, &b, false).is_some());
    }

    #[test]
    fn payloads_unify_only_with_themselves_or_variables() {
        let mut p = Program::new();
        let x = parse_query("img($a)", &mut p).unwrap().atoms()[0].clone();
        let y = parse_query("img($b)", &mut p).unwrap().atoms()[0].clone();
        let v = parse_query("img(V)", &mut p).unwrap().atoms()[0].clone();
        assert!(unify(&x, &x, false).is_some());
        assert!(unify(&x, &y, false).is_none());
        assert!(unify(&x, &v, false).is_some());
    }

    #[test]
    fn apply_examples() {
        let mut p = Program::new();
        let g = parse_query("locatedIn(X, europe)", &mut p).unwrap();
        let italy = Term::Const(p.symbols.intern("italy"));
        let s = Substitution::from_pairs([(Var(0), italy)]);
        assert_eq!(
            p.atom_to_string(&s.apply_atom(&g.atoms()[0])),
            "locatedIn(italy, europe)"
        );

        assert_eq!(Substitution::new().apply_goal(&g), g);

        let pxy = parse_query("p(X, Y)", &mut p).unwrap().atoms()[0].clone();
        let f = p.symbols.intern("f");
        let s = Substitution::from_pairs([(Var(0), Term::Compound(f, vec![Term::Var(Var(1))]))]);
        assert_eq!(p.atom_to_string(&s.apply_atom(&pxy)), "p(f(_1), _1)");
    }

    #[test]
    fn compose_examples() {
        let a = Term::Const(Symbol(7));
        let xy = Substitution::from_pairs([(Var(0), Term::Var(Var(1)))]);
        let ya = Substitution::from_pairs([(Var(1), a.clone())]);
        let c = xy.compose(&ya);
        assert_eq!(c.get(Var(0)), Some(&a));
        assert_eq!(c.get(Var(1)), Some(&a));
        assert_eq!(c.len(), 2);
        assert_eq!(Substitution::new().compose(&ya), ya);
        assert_eq!(ya.compose(&Substitution::new()), ya);
    }

    #[test]
    fn rename_apart_examples() {
        let p = parse_program("p(X) :- q(X). r(a).").unwrap();
        let mut ctr = VarCounter::starting_at(100);
        let c = rename_apart(&p.clauses()[0], &mut ctr);
        assert_eq!(c.head.args[0], Term::Var(Var(100)));
        assert_eq!(c.body[0].args[0], Term::Var(Var(100)));
        assert_eq!(ctr.peek(), 101);

        let fact = rename_apart(&p.clauses()[1], &mut ctr);
        assert_eq!(fact, p.clauses()[1]);

        let c2 = rename_apart(&p.clauses()[0], &mut ctr);
        assert_ne!(c.head.args[0], c2.head.args[0]);
    }

    #[test]
    fn goals_compare_up_to_renaming() {
        let mut p = geo();
        let g1 = parse_query("neighOf(it,Y), locIn(Y,eu)", &mut p).unwrap();
        let g2 = parse_query("neighOf(it,Other), locIn(Other,eu)", &mut p).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(g1.fingerprint(), g2.fingerprint());
    }

    #[test]
    fn program_source_round_trip() {
        let p = geo();
        assert_eq!(parse_program(&p.to_source()).unwrap(), p);
        let odd = parse_program("w('Hello World', '12', 12, $img, [a, b|T], X) :- X = (1 + 2).").unwrap();
        assert_eq!(parse_program(&odd.to_source()).unwrap(), odd);
    }
}
