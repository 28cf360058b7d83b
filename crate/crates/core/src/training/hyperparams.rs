use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::networks::{JointConfig, LstmClassifierConfig};

/// Training and architecture settings, recorded verbatim in checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Hyperparams {
    pub embed_dim: usize,
    /// Per-direction hidden size for the joint model.
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hops: usize,
    pub attention_hidden: usize,
    pub fc_hidden: usize,
    pub penalty_coef: f64,
}

pub const HYPERPARAM_KEYS: [&str; 11] = [
    "embed_dim",
    "hidden",
    "layers",
    "dropout",
    "batch_size",
    "epochs",
    "learning_rate",
    "hops",
    "attention_hidden",
    "fc_hidden",
    "penalty_coef",
];

impl Hyperparams {
    pub fn baseline() -> Self {
        Self {
            embed_dim: 300,
            hidden: 64,
            layers: 8,
            dropout: 0.5,
            batch_size: 32,
            epochs: 30,
            learning_rate: 1e-4,
            hops: 20,
            attention_hidden: 150,
            fc_hidden: 2000,
            penalty_coef: 0.6,
        }
    }

    pub fn joint() -> Self {
        Self {
            hidden: 32,
            epochs: 20,
            ..Self::baseline()
        }
    }

    pub fn lstm_config(&self) -> LstmClassifierConfig {
        LstmClassifierConfig {
            input: self.embed_dim,
            hidden: self.hidden,
            layers: self.layers,
            dropout: self.dropout,
        }
    }

    pub fn joint_config(&self) -> JointConfig {
        JointConfig {
            input: self.embed_dim,
            hidden: self.hidden,
            layers: self.layers,
            dropout: self.dropout,
            hops: self.hops,
            attention_hidden: self.attention_hidden,
            fc_hidden: self.fc_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("embed_dim", self.embed_dim),
            ("hidden", self.hidden),
            ("layers", self.layers),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("hops", self.hops),
            ("attention_hidden", self.attention_hidden),
            ("fc_hidden", self.fc_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must lie in [0, 1)"));
        }
        if !(self.penalty_coef >= 0.0 && self.penalty_coef.is_finite()) {
            return Err(Error::invalid("penalty_coef must be non-negative"));
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<V: FromStr>(key: &str, value: &str) -> Result<V> {
            value.trim().parse().map_err(|_| {
                Error::parse("hyperparameters", format!("bad value {value:?} for {key}"))
            })
        }
        match key.trim() {
            "embed_dim" => self.embed_dim = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "hops" => self.hops = num(key, value)?,
            "attention_hidden" => self.attention_hidden = num(key, value)?,
            "fc_hidden" => self.fc_hidden = num(key, value)?,
            "penalty_coef" => self.penalty_coef = num(key, value)?,
            other => {
                return Err(Error::parse(
                    "hyperparameters",
                    format!("unknown key {other:?}"),
                ))
            }
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::parse(
                    "hyperparameters",
                    format!("line {}: expected key=value", n + 1),
                )
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(base: Self, text: &str) -> Result<Self> {
        let mut hp = base;
        hp.apply_text(text)?;
        hp.validate()?;
        Ok(hp)
    }

    pub fn load(base: Self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(base, &text)
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "embed_dim={}", self.embed_dim)?;
        writeln!(f, "hidden={}", self.hidden)?;
        writeln!(f, "layers={}", self.layers)?;
        writeln!(f, "dropout={}", self.dropout)?;
        writeln!(f, "batch_size={}", self.batch_size)?;
        writeln!(f, "epochs={}", self.epochs)?;
        writeln!(f, "learning_rate={}", self.learning_rate)?;
        writeln!(f, "hops={}", self.hops)?;
        writeln!(f, "attention_hidden={}", self.attention_hidden)?;
        writeln!(f, "fc_hidden={}", self.fc_hidden)?;
        writeln!(f, "penalty_coef={}", self.penalty_coef)
    }
}
