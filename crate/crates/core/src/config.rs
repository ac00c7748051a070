//! Flat `key = value` configuration, flag overrides, and the content hash
//! stamped on every artifact.
//!
//! ```text
//! # scenario
//! num_ues = 2
//! sdus_per_ue = 2
//! t_max = 32
//! bler = 0.1
//! start_buffer = empty
//! ```
//!
//! `num_ues`, `sdus_per_ue` and `t_max` are required; everything else has a
//! default (see [`ConfigBuilder`]).

use crate::env::{EnvConfig, TrafficMode};
use crate::error::{Error, Result};
use crate::learner::hex;
use crate::trainer::{AgentKind, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const KEYS: &[&str] = &[
    "num_ues",
    "sdus_per_ue",
    "bler",
    "t_max",
    "buffer_capacity",
    "start_buffer",
    "arrival_prob",
    "alpha",
    "gamma",
    "f_eps",
    "eps_floor",
    "n_tr",
    "n_eval",
    "n_rep",
    "memory_len",
    "seed",
    "agent",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigBuilder {
    num_ues: Option<usize>,
    sdus_per_ue: Option<usize>,
    t_max: Option<usize>,
    bler: Option<f64>,
    buffer_capacity: Option<usize>,
    traffic_mode: Option<TrafficMode>,
    arrival_prob: Option<f64>,
    alpha: Option<f64>,
    gamma: Option<f64>,
    f_eps: Option<f64>,
    eps_floor: Option<f64>,
    n_tr: Option<usize>,
    n_eval: Option<usize>,
    n_rep: Option<usize>,
    memory_len: Option<usize>,
    seed: Option<u64>,
    agent: Option<AgentKind>,
}

/// Validated configuration plus whether a seed was given explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub env: EnvConfig,
    pub train: TrainConfig,
    pub seed_given: bool,
}

impl ParsedConfig {
    pub fn hash(&self) -> String {
        config_hash(&self.env, &self.train)
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(key, format!("cannot parse `{value}`")))
}

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "num_ues" => self.num_ues = Some(num(key, value)?),
            "sdus_per_ue" => self.sdus_per_ue = Some(num(key, value)?),
            "t_max" => self.t_max = Some(num(key, value)?),
            "bler" => self.bler = Some(num(key, value)?),
            "buffer_capacity" => self.buffer_capacity = Some(num(key, value)?),
            "start_buffer" => {
                self.traffic_mode = Some(match value.trim() {
                    "full" => TrafficMode::FullBufferStart,
                    "empty" => TrafficMode::EmptyBufferStart,
                    other => {
                        return Err(Error::invalid(
                            key,
                            format!("`{other}` is not `full` or `empty`"),
                        ))
                    }
                })
            }
            "arrival_prob" => self.arrival_prob = Some(num(key, value)?),
            "alpha" => self.alpha = Some(num(key, value)?),
            "gamma" => self.gamma = Some(num(key, value)?),
            "f_eps" => self.f_eps = Some(num(key, value)?),
            "eps_floor" => self.eps_floor = Some(num(key, value)?),
            "n_tr" => self.n_tr = Some(num(key, value)?),
            "n_eval" => self.n_eval = Some(num(key, value)?),
            "n_rep" => self.n_rep = Some(num(key, value)?),
            "memory_len" => self.memory_len = Some(num(key, value)?),
            "seed" => self.seed = Some(num(key, value)?),
            "agent" => {
                self.agent = Some(AgentKind::from_label(value.trim()).ok_or_else(|| {
                    Error::invalid(
                        key,
                        format!("`{}` is not learner|expert|pi1|pi2", value.trim()),
                    )
                })?)
            }
            other => return Err(Error::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Reads `key = value` lines; `#` starts a comment.
    pub fn read_str(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn read_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.read_str(&text)
    }

    pub fn build(&self) -> Result<ParsedConfig> {
        let num_ues = self
            .num_ues
            .ok_or_else(|| Error::MissingField("num_ues".into()))?;
        let sdus = self
            .sdus_per_ue
            .ok_or_else(|| Error::MissingField("sdus_per_ue".into()))?;
        let t_max = self
            .t_max
            .ok_or_else(|| Error::MissingField("t_max".into()))?;
        let env = EnvConfig {
            num_ues,
            sdus_per_ue: sdus,
            bler: self.bler.unwrap_or(0.0),
            t_max,
            buffer_capacity: self.buffer_capacity.unwrap_or(sdus),
            traffic_mode: self.traffic_mode.unwrap_or(TrafficMode::FullBufferStart),
            arrival_prob: self.arrival_prob.unwrap_or(0.5),
        };
        env.validate()?;
        let d = TrainConfig::default();
        let train = TrainConfig {
            alpha: self.alpha.unwrap_or(d.alpha),
            gamma: self.gamma.unwrap_or(d.gamma),
            f_eps: self.f_eps.unwrap_or(d.f_eps),
            eps_floor: self.eps_floor.unwrap_or(d.eps_floor),
            n_tr: self.n_tr.unwrap_or(d.n_tr),
            n_eval: self.n_eval.unwrap_or(d.n_eval),
            n_rep: self.n_rep.unwrap_or(d.n_rep),
            memory_len: self.memory_len.unwrap_or(d.memory_len),
            seed: self.seed.unwrap_or(d.seed),
            agent_kind: self.agent.unwrap_or(d.agent_kind),
        };
        train.validate()?;
        Ok(ParsedConfig {
            env,
            train,
            seed_given: self.seed.is_some(),
        })
    }
}

pub fn parse_config_str(text: &str) -> Result<ParsedConfig> {
    let mut b = ConfigBuilder::new();
    b.read_str(text)?;
    b.build()
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let mut b = ConfigBuilder::new();
    b.read_file(path)?;
    b.build()
}

/// Canonical `key=value` rendering of every field that influences results.
pub fn canonical(env: &EnvConfig, train: &TrainConfig) -> String {
    let start = match env.traffic_mode {
        TrafficMode::FullBufferStart => "full",
        TrafficMode::EmptyBufferStart => "empty",
    };
    format!(
        "num_ues={}\nsdus_per_ue={}\nbler={:?}\nt_max={}\nbuffer_capacity={}\nstart_buffer={}\n\
         arrival_prob={:?}\nalpha={:?}\ngamma={:?}\nf_eps={:?}\neps_floor={:?}\nn_tr={}\nn_eval={}\n\
         n_rep={}\nmemory_len={}\nseed={}\nagent={}\n",
        env.num_ues,
        env.sdus_per_ue,
        env.bler,
        env.t_max,
        env.buffer_capacity,
        start,
        env.arrival_prob,
        train.alpha,
        train.gamma,
        train.f_eps,
        train.eps_floor,
        train.n_tr,
        train.n_eval,
        train.n_rep,
        train.memory_len,
        train.seed,
        train.agent_kind.label(),
    )
}

/// First 16 hex digits of SHA-256 over [`canonical`].
pub fn config_hash(env: &EnvConfig, train: &TrainConfig) -> String {
    let digest = Sha256::digest(canonical(env, train).as_bytes());
    hex(&digest[..8])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub env: EnvConfig,
    pub train: TrainConfig,
    /// Present for train-here-evaluate-there runs.
    pub eval_env: Option<EnvConfig>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

impl RunManifest {
    pub fn new(env: &EnvConfig, train: &TrainConfig) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(env, train),
            master_seed: train.seed,
            env: env.clone(),
            train: train.clone(),
            eval_env: None,
            started_unix: unix_now(),
            finished_unix: 0,
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = unix_now();
    }
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
