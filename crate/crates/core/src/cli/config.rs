//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::optim::{OptimizerConfig, OptimizerKind};
use crate::pg::PpoConfig;
use crate::scorer::{Aggregator, ScorerConfig};
use crate::tasks::kg::{CorruptMode, TieBreak};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Task {
    /// A logic program with a labeled query file.
    Program,
    Addition,
    Kg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// Learned parameters, from `checkpoint` or freshly initialized.
    Neural,
    /// Every candidate equally likely.
    Uniform,
    /// Every ranked triple gets the same score (ranking evaluation only).
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PgAlgorithm {
    Ppo,
    Reinforce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimator {
    /// Exact DP, falling back to sampling when the state cap trips.
    Auto,
    Dp,
    MonteCarlo,
}

macro_rules! keyword_enum {
    ($ty:ident, $what:literal, $($name:literal => $variant:ident),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(concat!("unknown ", $what, " `{}`"), other))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name,)+ })
            }
        }
    };
}

keyword_enum!(Task, "task", "program" => Program, "addition" => Addition, "kg" => Kg);
keyword_enum!(ModelKind, "model", "neural" => Neural, "uniform" => Uniform, "constant" => Constant);
keyword_enum!(PgAlgorithm, "pg algorithm", "ppo" => Ppo, "reinforce" => Reinforce);
keyword_enum!(Estimator, "estimator", "auto" => Auto, "dp" => Dp, "mc" => MonteCarlo);

impl FromStr for TieBreak {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pessimistic" => Ok(TieBreak::Pessimistic),
            "optimistic" => Ok(TieBreak::Optimistic),
            "random" => Ok(TieBreak::Random),
            other => Err(Error::Config(format!("unknown tie-breaking rule `{other}`"))),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Data {
            line: i + 1,
            msg: format!("expected key = value, found `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub program: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub query: Option<String>,
    pub kg_train: Option<PathBuf>,
    pub kg_valid: Option<PathBuf>,
    pub kg_test: Option<PathBuf>,
    pub kg_rules: Option<PathBuf>,
    pub kinship_entities: usize,
    pub kinship_drop: f64,
    pub priors: Option<PathBuf>,
    pub prior_weight: f64,
    pub scorer: ScorerConfig,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub epochs: usize,
    pub max_depth: usize,
    pub state_cap: usize,
    pub seed: u64,
    pub ppo: PpoConfig,
    pub pg_algorithm: PgAlgorithm,
    pub max_weight: f64,
    pub digits: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub feature_dim: usize,
    pub sigma: f64,
    pub data_seed: u64,
    pub negatives: usize,
    pub train_negatives: usize,
    pub corrupt: CorruptMode,
    pub tie: TieBreak,
    pub eval_split: String,
    pub checkpoint: Option<PathBuf>,
    pub resume: bool,
    pub output_dir: PathBuf,
    pub model: ModelKind,
    pub estimator: Estimator,
    pub mc_samples: usize,
    pub beam: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Program,
            program: None,
            queries: None,
            query: None,
            kg_train: None,
            kg_valid: None,
            kg_test: None,
            kg_rules: None,
            kinship_entities: 50,
            kinship_drop: 0.15,
            priors: None,
            prior_weight: 1.0,
            scorer: ScorerConfig::default(),
            optimizer: OptimizerConfig::default(),
            batch_size: 32,
            epochs: 10,
            max_depth: 8,
            state_cap: crate::dp::DEFAULT_STATE_CAP,
            seed: 0,
            ppo: PpoConfig::default(),
            pg_algorithm: PgAlgorithm::Ppo,
            max_weight: crate::pg::DEFAULT_MAX_WEIGHT,
            digits: 2,
            train_size: 2000,
            test_size: 500,
            feature_dim: 16,
            sigma: 0.5,
            data_seed: 0,
            negatives: 20,
            train_negatives: 1,
            corrupt: CorruptMode::Both,
            tie: TieBreak::Pessimistic,
            eval_split: "test".into(),
            checkpoint: None,
            resume: false,
            output_dir: PathBuf::from("out"),
            model: ModelKind::Neural,
            estimator: Estimator::Auto,
            mc_samples: 10_000,
            beam: 8,
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected true or false, found `{v}`"))),
    }
}

impl RunConfig {
    /// Reads `path` and applies `key=value` overrides in order. Relative paths
    /// are resolved against the configuration file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut entries = parse_entries(&text)?;
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        let base = path.parent().unwrap_or(Path::new(""));
        Self::from_entries(&entries, base)
    }

    pub fn from_entries(entries: &BTreeMap<String, String>, base: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        let path = |v: &str| -> PathBuf {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        for (k, v) in entries {
            let k = k.as_str();
            let v = v.as_str();
            match k {
                "task" => c.task = v.parse()?,
                "program" => c.program = Some(path(v)),
                "queries" => c.queries = Some(path(v)),
                "query" => c.query = Some(v.to_string()),
                "kg_train" => c.kg_train = Some(path(v)),
                "kg_valid" => c.kg_valid = Some(path(v)),
                "kg_test" => c.kg_test = Some(path(v)),
                "kg_rules" => c.kg_rules = Some(path(v)),
                "kinship_entities" => c.kinship_entities = parse(k, v)?,
                "kinship_drop" => c.kinship_drop = parse(k, v)?,
                "priors" => c.priors = Some(path(v)),
                "prior_weight" => c.prior_weight = parse(k, v)?,
                "dim" => c.scorer.dim = parse(k, v)?,
                "aggregator" => c.scorer.aggregator = v.parse::<Aggregator>()?,
                "var_slots" => c.scorer.var_slots = parse(k, v)?,
                "int_slots" => c.scorer.int_slots = parse(k, v)?,
                "max_arity" => c.scorer.max_arity = parse(k, v)?,
                "feature_dim" => c.feature_dim = parse(k, v)?,
                "init_std" => c.scorer.init_std = parse(k, v)?,
                "optimizer" => c.optimizer.kind = v.parse::<OptimizerKind>()?,
                "lr" => {
                    c.optimizer.lr = parse(k, v)?;
                    c.ppo.lr = c.optimizer.lr;
                }
                "batch_size" => c.batch_size = parse(k, v)?,
                "epochs" => c.epochs = parse(k, v)?,
                "max_depth" => c.max_depth = parse(k, v)?,
                "state_cap" => c.state_cap = parse(k, v)?,
                "seed" => c.seed = parse(k, v)?,
                "clip" => c.ppo.clip = parse(k, v)?,
                "entropy_coef" => c.ppo.entropy_coef = parse(k, v)?,
                "critic_coef" => c.ppo.critic_coef = parse(k, v)?,
                "ppo_epochs" => c.ppo.epochs = parse(k, v)?,
                "minibatch" => c.ppo.minibatch = parse(k, v)?,
                "rollouts" => c.ppo.rollouts = parse(k, v)?,
                "kl_stop" => c.ppo.kl_stop = if v == "none" { None } else { Some(parse(k, v)?) },
                "pg_algorithm" => c.pg_algorithm = v.parse()?,
                "max_weight" => c.max_weight = parse(k, v)?,
                "digits" => c.digits = parse(k, v)?,
                "train_size" => c.train_size = parse(k, v)?,
                "test_size" => c.test_size = parse(k, v)?,
                "sigma" => c.sigma = parse(k, v)?,
                "data_seed" => c.data_seed = parse(k, v)?,
                "negatives" => c.negatives = parse(k, v)?,
                "train_negatives" => c.train_negatives = parse(k, v)?,
                "corrupt" => c.corrupt = v.parse()?,
                "tie" => c.tie = v.parse()?,
                "eval_split" => c.eval_split = v.to_string(),
                "checkpoint" => c.checkpoint = Some(path(v)),
                "resume" => c.resume = parse_bool(k, v)?,
                "output_dir" => c.output_dir = path(v),
                "model" => c.model = v.parse()?,
                "estimator" => c.estimator = v.parse()?,
                "mc_samples" => c.mc_samples = parse(k, v)?,
                "beam" => c.beam = parse(k, v)?,
                other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("dim", self.scorer.dim),
            ("batch_size", self.batch_size),
            ("max_depth", self.max_depth),
            ("beam", self.beam),
            ("mc_samples", self.mc_samples),
            ("digits", self.digits),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{k}` must be positive")));
        }
        if !(self.optimizer.lr > 0.0) {
            return Err(Error::Config("`lr` must be positive".into()));
        }
        if !["test", "valid"].contains(&self.eval_split.as_str()) {
            return Err(Error::Config(format!(
                "`eval_split` must be test or valid, found `{}`",
                self.eval_split
            )));
        }
        self.ppo.validate()?;
        let kg_paths = [&self.kg_train, &self.kg_valid, &self.kg_test, &self.kg_rules];
        let given = kg_paths.iter().filter(|p| p.is_some()).count();
        if given != 0 && given != 4 {
            return Err(Error::Config(
                "kg_train, kg_valid, kg_test and kg_rules go together".into(),
            ));
        }
        for p in [&self.program, &self.queries, &self.priors, &self.checkpoint]
            .into_iter()
            .chain(kg_paths)
            .flatten()
        {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
                ));
            }
        }
        Ok(())
    }

    /// `key value` lines describing the configuration, for logs.
    pub fn summary(&self) -> String {
        format!(
            "task {}\nseed {}\ndim {}\naggregator {}\noptimizer {}\nlr {:?}\nmax_depth {}\nepochs {}\n",
            self.task,
            self.seed,
            self.scorer.dim,
            self.scorer.aggregator,
            self.optimizer.kind,
            self.optimizer.lr,
            self.max_depth,
            self.epochs
        )
    }
}
