//! A versioned text table of named flat vectors.
//!
//! ```text
//! dproflog-checkpoint 1
//! meta <key> <json>
//! vector <name> <len>
//! <values, whitespace separated>
//! end
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a save/load cycle is bit-exact.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{Aggregator, Layout, ScorerConfig, ScorerParams};
use crate::error::{Error, Result};

const MAGIC: &str = "dproflog-checkpoint";
const VERSION: u32 = 1;
const PER_LINE: usize = 8;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, Value>,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(out, "meta {k} {v}");
        }
        for (name, values) in &self.vectors {
            let _ = writeln!(out, "vector {name} {}", values.len());
            for chunk in values.chunks(PER_LINE) {
                let line: Vec<String> = chunk.iter().map(|x| format!("{x:?}")).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Checkpoint(msg);
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, header)) => {
                let mut parts = header.split_whitespace();
                if parts.next() != Some(MAGIC) {
                    return Err(bad("not a checkpoint file".into()));
                }
                let version: u32 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| bad("missing version".into()))?;
                if version != VERSION {
                    return Err(bad(format!("unsupported checkpoint version {version}")));
                }
            }
            None => return Err(bad("empty checkpoint".into())),
        }
        let mut ck = Checkpoint::new();
        let mut ended = false;
        while let Some((no, line)) = lines.next() {
            if line.is_empty() {
                continue;
            }
            if line == "end" {
                ended = true;
                break;
            }
            let (kind, rest) = line.split_once(' ').unwrap_or((line, ""));
            match kind {
                "meta" => {
                    let (key, value) = rest
                        .split_once(' ')
                        .ok_or_else(|| bad(format!("line {no}: malformed meta entry")))?;
                    let value: Value = serde_json::from_str(value).map_err(|e| bad(format!("line {no}: {e}")))?;
                    ck.meta.insert(key.to_string(), value);
                }
                "vector" => {
                    let mut parts = rest.split_whitespace();
                    let name = parts.next().ok_or_else(|| bad(format!("line {no}: missing name")))?;
                    let len: usize = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad(format!("line {no}: missing length")))?;
                    let mut values = Vec::with_capacity(len);
                    while values.len() < len {
                        let (vno, vline) = lines.next().ok_or_else(|| bad(format!("vector {name}: truncated")))?;
                        for tok in vline.split_whitespace() {
                            let x: f64 = tok
                                .parse()
                                .map_err(|_| bad(format!("line {vno}: bad number `{tok}`")))?;
                            values.push(x);
                        }
                    }
                    if values.len() != len {
                        return Err(bad(format!(
                            "vector {name}: expected {len} values, found {}",
                            values.len()
                        )));
                    }
                    ck.vectors.insert(name.to_string(), values);
                }
                other => return Err(bad(format!("line {no}: unknown entry `{other}`"))),
            }
        }
        if !ended {
            return Err(bad("missing end marker".into()));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn vector(&self, name: &str) -> Result<&[f64]> {
        self.vectors
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Checkpoint(format!("missing vector `{name}`")))
    }

    pub fn meta(&self, key: &str) -> Result<&Value> {
        self.meta
            .get(key)
            .ok_or_else(|| Error::Checkpoint(format!("missing meta entry `{key}`")))
    }

    fn meta_usize(&self, key: &str) -> Result<usize> {
        self.meta(key)?
            .as_u64()
            .map(|v| v as usize)
            .ok_or_else(|| Error::Checkpoint(format!("`{key}` is not an integer")))
    }
}

/// Stores a generator's seed, stream and position so that it resumes exactly.
pub fn write_rng(ck: &mut Checkpoint, key: &str, rng: &ChaCha8Rng) {
    ck.meta.insert(
        key.to_string(),
        json!({
            "seed": rng.get_seed().to_vec(),
            "stream": rng.get_stream(),
            "word_pos": rng.get_word_pos().to_string(),
        }),
    );
}

pub fn read_rng(ck: &Checkpoint, key: &str) -> Result<ChaCha8Rng> {
    let v = ck.meta(key)?;
    let bad = || Error::Checkpoint(format!("`{key}` is not a generator state"));
    let seed: Vec<u8> = serde_json::from_value(v["seed"].clone()).map_err(|_| bad())?;
    let seed: [u8; 32] = seed.try_into().map_err(|_| bad())?;
    let stream = v["stream"].as_u64().ok_or_else(bad)?;
    let pos: u128 = v["word_pos"].as_str().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(stream);
    rng.set_word_pos(pos);
    Ok(rng)
}

impl ScorerParams {
    /// Stores the parameters and everything needed to rebuild them under `prefix`.
    pub fn write_to(&self, prefix: &str, ck: &mut Checkpoint) {
        let c = &self.config;
        let mut ints: Vec<(i64, usize)> = self.int_rows.iter().map(|(k, v)| (*k, *v)).collect();
        ints.sort_unstable();
        let entries = [
            ("dim", json!(c.dim)),
            ("aggregator", json!(c.aggregator.to_string())),
            ("var_slots", json!(c.var_slots)),
            ("int_slots", json!(c.int_slots)),
            ("max_arity", json!(c.max_arity)),
            ("feature_dim", json!(c.feature_dim)),
            ("init_std", json!(c.init_std)),
            ("symbols", json!(self.symbol_names)),
            ("int_rows", json!(ints)),
        ];
        for (k, v) in entries {
            ck.meta.insert(format!("{prefix}.{k}"), v);
        }
        ck.vectors.insert(format!("{prefix}.params"), self.values.clone());
    }

    pub fn read_from(ck: &Checkpoint, prefix: &str) -> Result<Self> {
        let key = |k: &str| format!("{prefix}.{k}");
        let aggregator: Aggregator = ck
            .meta(&key("aggregator"))?
            .as_str()
            .ok_or_else(|| Error::Checkpoint("aggregator is not a string".into()))?
            .parse()?;
        let config = ScorerConfig {
            dim: ck.meta_usize(&key("dim"))?,
            aggregator,
            var_slots: ck.meta_usize(&key("var_slots"))?,
            int_slots: ck.meta_usize(&key("int_slots"))?,
            max_arity: ck.meta_usize(&key("max_arity"))?,
            feature_dim: ck.meta_usize(&key("feature_dim"))?,
            init_std: ck.meta(&key("init_std"))?.as_f64().unwrap_or(0.1),
        };
        let symbol_names: Vec<String> = serde_json::from_value(ck.meta(&key("symbols"))?.clone())
            .map_err(|e| Error::Checkpoint(format!("symbols: {e}")))?;
        let ints: Vec<(i64, usize)> = serde_json::from_value(ck.meta(&key("int_rows"))?.clone())
            .map_err(|e| Error::Checkpoint(format!("int_rows: {e}")))?;
        let int_rows: HashMap<i64, usize> = ints.into_iter().collect();
        let layout = Layout::new(&config, symbol_names.len() + 1);
        let values = ck.vector(&key("params"))?.to_vec();
        if values.len() != layout.total {
            return Err(Error::Checkpoint(format!(
                "parameter vector has {} entries, layout needs {}",
                values.len(),
                layout.total
            )));
        }
        Ok(ScorerParams {
            config,
            symbol_names,
            int_rows,
            layout,
            values,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ck = Checkpoint::new();
        self.write_to("scorer", &mut ck);
        ck.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&Checkpoint::load(path)?, "scorer")
    }
}
