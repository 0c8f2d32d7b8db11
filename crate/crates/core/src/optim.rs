//! First-order ascent on a flat parameter vector.

use std::fmt;
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::scorer::Checkpoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl FromStr for OptimizerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Optimizer {
    pub config: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig) -> Self {
        Optimizer {
            config,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self::new(OptimizerConfig {
            kind: OptimizerKind::Sgd,
            lr,
            ..Default::default()
        })
    }

    pub fn adam(lr: f64) -> Self {
        Self::new(OptimizerConfig {
            lr,
            ..Default::default()
        })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Moves `params` along `grad` (gradient ascent). Rejects non-finite gradients
    /// without touching the parameters.
    pub fn ascend(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                found: grad.len(),
            });
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        self.t += 1;
        let c = &self.config;
        match c.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += c.lr * g;
                }
            }
            OptimizerKind::Adam => {
                if self.m.len() != params.len() {
                    self.m = vec![0.0; params.len()];
                    self.v = vec![0.0; params.len()];
                }
                let b1t = 1.0 - c.beta1.powi(self.t as i32);
                let b2t = 1.0 - c.beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
                    self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
                    let mh = self.m[i] / b1t;
                    let vh = self.v[i] / b2t;
                    params[i] += c.lr * mh / (vh.sqrt() + c.eps);
                }
            }
        }
        Ok(())
    }
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Optimizer {
    /// Stores the optimizer's moments and step count under `prefix`.
    pub fn write_to(&self, prefix: &str, ck: &mut Checkpoint) {
        ck.meta
            .insert(format!("{prefix}.kind"), json!(self.config.kind.to_string()));
        ck.meta.insert(format!("{prefix}.steps"), json!(self.t));
        ck.vectors.insert(format!("{prefix}.m"), self.m.clone());
        ck.vectors.insert(format!("{prefix}.v"), self.v.clone());
    }

    /// Restores state written by [`Optimizer::write_to`]; the configuration is kept.
    pub fn read_state(&mut self, ck: &Checkpoint, prefix: &str) -> Result<()> {
        let kind: OptimizerKind = ck
            .meta(&format!("{prefix}.kind"))?
            .as_str()
            .ok_or_else(|| Error::Checkpoint("optimizer kind is not a string".into()))?
            .parse()?;
        if kind != self.config.kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint optimizer is {kind}, configured {}",
                self.config.kind
            )));
        }
        self.t = ck
            .meta(&format!("{prefix}.steps"))?
            .as_u64()
            .ok_or_else(|| Error::Checkpoint("optimizer step count".into()))?;
        self.m = ck.vector(&format!("{prefix}.m"))?.to_vec();
        self.v = ck.vector(&format!("{prefix}.v"))?.to_vec();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_moves_along_gradient() {
        let mut o = Optimizer::sgd(0.5);
        let mut p = vec![1.0, 2.0];
        o.ascend(&mut p, &[2.0, -2.0]).unwrap();
        assert_eq!(p, vec![2.0, 1.0]);
    }

    #[test]
    fn adam_first_step_is_lr_times_sign() {
        let mut o = Optimizer::adam(0.1);
        let mut p = vec![0.0, 0.0];
        o.ascend(&mut p, &[3.0, -0.5]).unwrap();
        assert!((p[0] - 0.1).abs() < 1e-6 && (p[1] + 0.1).abs() < 1e-6);
    }

    #[test]
    fn rejects_nan() {
        let mut o = Optimizer::sgd(0.1);
        let mut p = vec![0.0];
        assert!(o.ascend(&mut p, &[f64::NAN]).is_err());
        assert_eq!(p, vec![0.0]);
    }
}
