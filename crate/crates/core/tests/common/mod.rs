#![allow(dead_code)]

use dproflog::dp::{solve, DpConfig, LabeledQuery};
use dproflog::logic::{parse_program, parse_query, Program};
use dproflog::scorer::{FeatureStore, NeuralPolicy, ScorerConfig, ScorerParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const UNARY: [&str; 4] = ["p", "q", "r", "s"];
const CONSTS: [&str; 3] = ["a", "b", "c"];

/// Source of a random definite program over four unary predicates, one
/// binary edge relation and three constants. Rules may be recursive.
pub fn random_program_source(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::new();
    for p in UNARY {
        let mut any = false;
        for c in CONSTS {
            if rng.gen_bool(0.35) {
                out.push_str(&format!("{p}({c}).\n"));
                any = true;
            }
        }
        if !any {
            out.push_str(&format!("{p}({}).\n", CONSTS.choose(rng).unwrap()));
        }
    }
    for x in CONSTS {
        for y in CONSTS {
            if x != y && rng.gen_bool(0.3) {
                out.push_str(&format!("e({x},{y}).\n"));
            }
        }
    }
    for _ in 0..rng.gen_range(3..=6) {
        let h = UNARY.choose(rng).unwrap();
        let b1 = UNARY.choose(rng).unwrap();
        let b2 = UNARY.choose(rng).unwrap();
        let rule = match rng.gen_range(0..3) {
            0 => format!("{h}(X) :- {b1}(X).\n"),
            1 => format!("{h}(X) :- {b1}(X), {b2}(X).\n"),
            _ => format!("{h}(X) :- e(X,Y), {b1}(Y).\n"),
        };
        out.push_str(&rule);
    }
    out.push_str("e(X,Y) :- e(Y,X).\n");
    out
}

pub fn random_query_text(rng: &mut ChaCha8Rng) -> String {
    let p = UNARY.choose(rng).unwrap();
    if rng.gen_bool(0.2) {
        format!("{p}(X)")
    } else {
        format!("{p}({})", CONSTS.choose(rng).unwrap())
    }
}

pub struct Instance {
    pub program: Program,
    pub queries: Vec<LabeledQuery>,
    pub params: ScorerParams,
    pub max_depth: usize,
}

impl Instance {
    pub fn policy<'a>(&'a self, store: &'a FeatureStore) -> NeuralPolicy<'a> {
        NeuralPolicy::new(&self.params, store)
    }
}

pub fn scorer_config(dim: usize) -> ScorerConfig {
    ScorerConfig {
        dim,
        init_std: 0.6,
        ..Default::default()
    }
}

/// A random program with `nq` labeled queries, each reaching at most
/// `max_goals` goals within `max_depth` steps, and random scorer parameters.
pub fn random_instance(seed: u64, nq: usize, max_depth: usize, max_goals: usize, dim: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    'retry: loop {
        let mut program = parse_program(&random_program_source(&mut rng)).expect("generated program parses");
        let mut queries = Vec::new();
        for _ in 0..nq {
            let text = random_query_text(&mut rng);
            let goal = parse_query(&text, &mut program).unwrap();
            let table = solve(&goal, &program, &dproflog::sld::UniformModel, &DpConfig::new(max_depth)).unwrap();
            if table.reachable_goals() > max_goals {
                continue 'retry;
            }
            queries.push(LabeledQuery::new(goal, rng.gen_bool(0.5)));
        }
        let params = ScorerParams::new(&program, scorer_config(dim), rng.gen()).unwrap();
        return Instance {
            program,
            queries,
            params,
            max_depth,
        };
    }
}
