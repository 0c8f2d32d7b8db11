//! Knowledge-graph completion: triple files, a synthetic kinship graph,
//! negative sampling and ranking metrics.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dp::LabeledQuery;
use crate::error::{Error, Result};
use crate::logic::{parse_program, Atom, ClauseId, Goal, Program};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: &str, relation: &str, tail: &str) -> Self {
        Triple {
            head: head.to_string(),
            relation: relation.to_string(),
            tail: tail.to_string(),
        }
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}", self.head, self.relation, self.tail)
    }
}

impl std::fmt::Display for Triple {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}({}, {})", self.relation, self.head, self.tail)
    }
}

/// Parses `head<TAB>relation<TAB>tail` lines; blank lines and `#` comments are skipped.
pub fn parse_triples(text: &str) -> Result<Vec<Triple>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').map(str::trim).collect();
        if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
            return Err(Error::Data {
                line: i + 1,
                msg: format!("expected head<TAB>relation<TAB>tail, found `{line}`"),
            });
        }
        out.push(Triple::new(parts[0], parts[1], parts[2]));
    }
    Ok(out)
}

pub fn triples_to_tsv(triples: &[Triple]) -> String {
    triples.iter().map(|t| t.to_tsv() + "\n").collect()
}

#[derive(Clone, Debug)]
pub struct KgDataset {
    /// Rules followed by one fact per training triple.
    pub program: Program,
    pub entities: Vec<String>,
    pub relations: Vec<String>,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
    fact_ids: HashMap<Triple, ClauseId>,
}

impl KgDataset {
    pub fn from_parts(rules: &str, train: Vec<Triple>, valid: Vec<Triple>, test: Vec<Triple>) -> Result<Self> {
        let train_set: HashSet<&Triple> = train.iter().collect();
        for (name, split) in [("test", &test), ("validation", &valid)] {
            if let Some(t) = split.iter().find(|t| train_set.contains(t)) {
                return Err(Error::Validation(format!("{name} triple {t} is also a training fact")));
            }
        }
        let mut program = parse_program(rules)?;
        let mut entities = BTreeSet::new();
        let mut relations = BTreeSet::new();
        for t in train.iter().chain(&valid).chain(&test) {
            entities.insert(t.head.clone());
            entities.insert(t.tail.clone());
            relations.insert(t.relation.clone());
        }
        for e in &entities {
            program.constant(e);
        }
        for r in &relations {
            let s = program.symbols.intern(r);
            program.check_arity(s, 2)?;
        }
        let mut fact_ids = HashMap::new();
        for t in &train {
            if fact_ids.contains_key(t) {
                continue;
            }
            let id = program.add_fact(&t.relation, &[&t.head, &t.tail])?;
            fact_ids.insert(t.clone(), id);
        }
        Ok(KgDataset {
            program,
            entities: entities.into_iter().collect(),
            relations: relations.into_iter().collect(),
            train,
            valid,
            test,
            fact_ids,
        })
    }

    /// The query atom `relation(head, tail)`.
    pub fn goal(&self, t: &Triple) -> Result<Goal> {
        let p = &self.program;
        let pred = p
            .symbols
            .lookup(&t.relation)
            .ok_or_else(|| Error::Validation(format!("unknown relation `{}`", t.relation)))?;
        let term = |name: &str| {
            p.lookup_constant(name)
                .ok_or_else(|| Error::Validation(format!("unknown entity `{name}`")))
        };
        Ok(Goal::new(vec![Atom::new(pred, vec![term(&t.head)?, term(&t.tail)?])]))
    }

    /// The fact clause of a training triple.
    pub fn fact_id(&self, t: &Triple) -> Option<ClauseId> {
        self.fact_ids.get(t).copied()
    }

    /// All known true triples (train, validation and test).
    pub fn known(&self) -> HashSet<Triple> {
        self.train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .cloned()
            .collect()
    }

    /// A labeled query for `t`; a triple's own fact is hidden while proving it.
    pub fn labeled(&self, t: &Triple, label: bool) -> Result<LabeledQuery> {
        Ok(LabeledQuery {
            goal: self.goal(t)?,
            label,
            banned: self.fact_id(t).into_iter().collect(),
        })
    }

    pub fn relation_counts(&self) -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for t in &self.train {
            *m.entry(t.relation.clone()).or_insert(0) += 1;
        }
        m
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_kg(train: &Path, valid: &Path, test: &Path, rules: &Path) -> Result<KgDataset> {
    KgDataset::from_parts(
        &read(rules)?,
        parse_triples(&read(train)?)?,
        parse_triples(&read(valid)?)?,
        parse_triples(&read(test)?)?,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorruptMode {
    Head,
    Tail,
    Both,
}

impl std::str::FromStr for CorruptMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(CorruptMode::Head),
            "tail" => Ok(CorruptMode::Tail),
            "both" => Ok(CorruptMode::Both),
            other => Err(Error::Config(format!("unknown corruption mode `{other}`"))),
        }
    }
}

/// `k` distinct corruptions of `q`, none of which is a known true triple.
pub fn sample_negatives(
    q: &Triple,
    k: usize,
    entities: &[String],
    mode: CorruptMode,
    known: &HashSet<Triple>,
    seed: u64,
) -> Result<Vec<Triple>> {
    let mut pool: Vec<Triple> = Vec::new();
    let mut seen = HashSet::new();
    let slots: &[bool] = match mode {
        CorruptMode::Head => &[true],
        CorruptMode::Tail => &[false],
        CorruptMode::Both => &[true, false],
    };
    for &head in slots {
        for e in entities {
            let c = if head {
                Triple::new(e, &q.relation, &q.tail)
            } else {
                Triple::new(&q.head, &q.relation, e)
            };
            if c != *q && !known.contains(&c) && seen.insert(c.clone()) {
                pool.push(c);
            }
        }
    }
    if pool.len() < k {
        return Err(Error::Validation(format!(
            "only {} admissible corruptions of {q}, {k} requested",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    pool.truncate(k);
    Ok(pool)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TieBreak {
    /// The true answer ranks below every equally scored corruption.
    Pessimistic,
    Optimistic,
    /// Uniform position among the tied group.
    Random,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankResult {
    pub query: String,
    pub true_score: f64,
    pub corrupt_scores: Vec<f64>,
    pub rank: usize,
}

impl RankResult {
    pub fn new<R: Rng>(query: String, true_score: f64, corrupt_scores: Vec<f64>, tie: TieBreak, rng: &mut R) -> Self {
        let better = corrupt_scores.iter().filter(|s| **s > true_score).count();
        let equal = corrupt_scores.iter().filter(|s| **s == true_score).count();
        let rank = 1
            + better
            + match tie {
                TieBreak::Pessimistic => equal,
                TieBreak::Optimistic => 0,
                TieBreak::Random => rng.gen_range(0..=equal),
            };
        RankResult {
            query,
            true_score,
            corrupt_scores,
            rank,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankMetrics {
    pub mrr: f64,
    pub hits: BTreeMap<usize, f64>,
    pub queries: usize,
}

impl RankMetrics {
    /// `key value` lines with fixed formatting.
    pub fn report(&self) -> String {
        let mut s = format!("queries {}\nmrr {:.6}\n", self.queries, self.mrr);
        for (n, h) in &self.hits {
            s += &format!("hits@{n} {h:.6}\n");
        }
        s
    }
}

pub fn rank_metrics(results: &[RankResult], ns: &[usize]) -> Result<RankMetrics> {
    if results.is_empty() {
        return Err(Error::Domain("no ranked queries".into()));
    }
    let q = results.len() as f64;
    let mrr = results.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / q;
    let hits = ns
        .iter()
        .map(|&n| (n, results.iter().filter(|r| r.rank <= n).count() as f64 / q))
        .collect();
    Ok(RankMetrics {
        mrr,
        hits,
        queries: results.len(),
    })
}

/// `E[1 / rank]` for a uniformly random rank among `n` candidates.
pub fn uniform_mrr(n: usize) -> f64 {
    (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64
}

/// Ranking score from a success probability and an optional prior,
/// combined additively in log space.
pub fn combine_score(p_success: f64, prior: Option<f64>, weight: f64) -> f64 {
    match prior {
        None => p_success,
        Some(s) => {
            if p_success > 0.0 {
                p_success.ln() + weight * s
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Rules of the synthetic kinship graph. The first four derive uncles
/// correctly; the last two are plausible-looking but wrong.
pub const KINSHIP_RULES: &str = "\
uncle(X,Y) :- brother(Z,Y), uncle(X,Z).
uncle(X,Y) :- sister(Z,Y), uncle(X,Z).
uncle(X,Y) :- father(Z,Y), brother(X,Z).
uncle(X,Y) :- mother(Z,Y), brother(X,Z).
uncle(X,Y) :- father(X,Z), brother(Z,Y).
uncle(X,Y) :- brother(X,Z), sister(Z,Y).
";

#[derive(Clone, Debug, PartialEq)]
pub struct KinshipGraph {
    pub rules: String,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl KinshipGraph {
    pub fn dataset(&self) -> Result<KgDataset> {
        KgDataset::from_parts(&self.rules, self.train.clone(), self.valid.clone(), self.test.clone())
    }
}

/// Three-generation families with numeric person ids starting at 1000, up to
/// `entities` people. Each `father`, `mother`, `brother` and `sister` fact is
/// dropped with probability `drop_rate` and otherwise goes to training;
/// `uncle` facts are split between training, validation and test.
pub fn generate_kinship(entities: usize, drop_rate: f64, seed: u64) -> Result<KinshipGraph> {
    if entities < 12 {
        return Err(Error::Config("a kinship graph needs at least 12 entities".into()));
    }
    if !(0.0..1.0).contains(&drop_rate) {
        return Err(Error::Config(format!("drop rate {drop_rate} outside [0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut male: Vec<bool> = Vec::new();
    // person ids are 1000 + index into `male`
    let fresh = |is_male: bool, male: &mut Vec<bool>| {
        male.push(is_male);
        999 + male.len() as u32
    };
    let mut facts: BTreeSet<Triple> = BTreeSet::new();
    let mut uncles: BTreeSet<Triple> = BTreeSet::new();
    let s = |x: u32| x.to_string();
    let add_children = |f: u32, m: u32, kids: &[u32], male: &[bool], facts: &mut BTreeSet<Triple>| {
        for &k in kids {
            facts.insert(Triple::new(&s(f), "father", &s(k)));
            facts.insert(Triple::new(&s(m), "mother", &s(k)));
        }
        for &a in kids {
            for &b in kids {
                if a != b {
                    let rel = if male[(a - 1000) as usize] { "brother" } else { "sister" };
                    facts.insert(Triple::new(&s(a), rel, &s(b)));
                }
            }
        }
    };
    // a family: two grandparents, three or four children, and up to three of
    // those children married with two or three kids each
    loop {
        let mut room = entities - male.len();
        if room < 8 {
            break;
        }
        let gf = fresh(true, &mut male);
        let gm = fresh(false, &mut male);
        let c = if room >= 9 { 4 } else { 3 };
        room -= 2 + c;
        let mut kids: Vec<u32> = (0..c)
            .map(|_| {
                let g = rng.gen_bool(0.5);
                fresh(g, &mut male)
            })
            .collect();
        // at least one brother so that uncles exist
        male[(kids[0] - 1000) as usize] = true;
        kids.shuffle(&mut rng);
        add_children(gf, gm, &kids, &male, &mut facts);
        for &parent in kids.iter().take(3) {
            if room < 3 {
                break;
            }
            let parent_male = male[(parent - 1000) as usize];
            let spouse = fresh(!parent_male, &mut male);
            let m = rng.gen_range(2..=3).min(room - 1);
            room -= 1 + m;
            let grandkids: Vec<u32> = (0..m)
                .map(|_| {
                    let g = rng.gen_bool(0.5);
                    fresh(g, &mut male)
                })
                .collect();
            let (f, mo) = if parent_male {
                (parent, spouse)
            } else {
                (spouse, parent)
            };
            add_children(f, mo, &grandkids, &male, &mut facts);
            for &u in &kids {
                if u != parent && male[(u - 1000) as usize] {
                    for &g in &grandkids {
                        uncles.insert(Triple::new(&s(u), "uncle", &s(g)));
                    }
                }
            }
        }
    }
    let mut uncles: Vec<Triple> = uncles.into_iter().collect();
    uncles.shuffle(&mut rng);
    let n_test = (uncles.len() / 5).max(1);
    let n_valid = (uncles.len() / 10).max(1);
    let test: Vec<Triple> = uncles.drain(..n_test).collect();
    let valid: Vec<Triple> = uncles.drain(..n_valid).collect();
    let mut train: Vec<Triple> = facts.into_iter().filter(|_| !rng.gen_bool(drop_rate)).collect();
    train.extend(uncles);
    train.sort();
    let mut test = test;
    test.sort();
    let mut valid = valid;
    valid.sort();
    Ok(KinshipGraph {
        rules: KINSHIP_RULES.to_string(),
        train,
        valid,
        test,
    })
}
