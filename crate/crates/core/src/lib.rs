//! Multi-agent tabular Q-learning of a MAC signaling policy and an uplink
//! channel-access policy, trained by self-play against a rule-based base
//! station.
//!
//! - [`env`]: shared packet-erasure uplink with per-UE transmit buffers.
//! - [`bs`]: base-station scheduler (random grants, ACK on reception).
//! - [`learner`]: memory window, state keys, the two Q-tables and updates.
//! - [`expert`]: hand-written UE policies used as baselines.
//! - [`trainer`]: episode loop, sessions, experiments, generalization, grids.
//! - [`analysis`]: closed-form single-UE optima, IC and Pearson correlation.
//! - [`config`], [`export`]: configuration files and on-disk formats.
//! - [`exec`]: parallel/sequential fan-out and seed splitting.

pub mod analysis;
pub mod bs;
pub mod config;
pub mod env;
pub mod error;
pub mod exec;
pub mod expert;
pub mod export;
pub mod learner;
pub mod trainer;
pub mod types;

pub use env::{Env, EnvConfig, TrafficMode};
pub use error::{Error, Result};
pub use exec::Exec;
pub use learner::QTables;
pub use trainer::{AgentKind, EpisodeTrace, Mode, SessionResult, TrainConfig};
pub use types::{BsObservation, ChannelAction, DownlinkMessage, UeObservation, UplinkMessage};
