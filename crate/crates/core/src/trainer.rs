//! Episode loop, self-play training sessions, repeated experiments,
//! train-here-evaluate-there runs and hyper-parameter grids.
//!
//! # Slot timing
//!
//! Within slot `t`:
//!
//! 1. every UE picks `(a_t, n_t)` from its buffer observation `o_t` and its
//!    memory `h_t`;
//! 2. the environment executes the joint channel actions, yielding the
//!    reward, `o_{t+1}` for every UE, and the channel outcome `o^b_{t+1}`;
//! 3. the BS answers the requests `n_t` with `m_t`, basing ACKs on the
//!    channel outcome it already holds, `o^b_t` (the outcome of slot
//!    `t-1`; idle at `t = 0`);
//! 4. every UE appends `(m_t, a_t, n_t, o_t)` to its memory;
//! 5. in training, both shared tables are updated once per UE with
//!    `(s_t, a_t, n_t, r_{t+1}, s_{t+1})`.
//!
//! A grant issued in slot `t` can therefore be used in slot `t+1`, while the
//! ACK for a transmission in slot `t` is first visible in slot `t+2`.

use crate::bs::bs_policy;
use crate::config::config_hash;
use crate::env::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::exec::{stream_rng, Exec};
use crate::expert::{expert_channel_access, expert_signaling, fire_and_delete, transmit_until_ack};
use crate::learner::{
    q_update, select_actions, MemoryRecord, MemoryWindow, QTables, StateKey, Transition,
    MAX_MEMORY_LEN,
};
use crate::types::{BsObservation, ChannelAction, DownlinkMessage, UeObservation, UplinkMessage};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Learner,
    ExpertUe,
    /// Transmit at the first opportunity, delete on the next slot.
    HandCodedPi1,
    /// Transmit every slot until an ACK is seen, then delete.
    HandCodedPi2,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Learner => "learner",
            AgentKind::ExpertUe => "expert",
            AgentKind::HandCodedPi1 => "pi1",
            AgentKind::HandCodedPi2 => "pi2",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "learner" => Some(AgentKind::Learner),
            "expert" => Some(AgentKind::ExpertUe),
            "pi1" => Some(AgentKind::HandCodedPi1),
            "pi2" => Some(AgentKind::HandCodedPi2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub f_eps: f64,
    pub eps_floor: f64,
    pub n_tr: usize,
    pub n_eval: usize,
    pub n_rep: usize,
    pub memory_len: usize,
    pub seed: u64,
    pub agent_kind: AgentKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.3,
            gamma: 1.0,
            f_eps: 0.999991,
            eps_floor: 0.01,
            n_tr: 8192,
            n_eval: 128,
            n_rep: 4,
            memory_len: 1,
            seed: 0,
            agent_kind: AgentKind::Learner,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(
                "alpha",
                format!("{} is outside (0, 1]", self.alpha),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(
                "gamma",
                format!("{} is outside [0, 1]", self.gamma),
            ));
        }
        if !(self.f_eps > 0.0 && self.f_eps <= 1.0) {
            return Err(Error::invalid(
                "f_eps",
                format!("{} is outside (0, 1]", self.f_eps),
            ));
        }
        if !(0.0..=1.0).contains(&self.eps_floor) {
            return Err(Error::invalid(
                "eps_floor",
                format!("{} is outside [0, 1]", self.eps_floor),
            ));
        }
        if self.n_eval == 0 {
            return Err(Error::invalid("n_eval", "must be at least 1"));
        }
        if self.n_rep == 0 {
            return Err(Error::invalid("n_rep", "must be at least 1"));
        }
        if self.memory_len > MAX_MEMORY_LEN {
            return Err(Error::invalid(
                "memory_len",
                format!(
                    "{} exceeds the maximum of {MAX_MEMORY_LEN}",
                    self.memory_len
                ),
            ));
        }
        Ok(())
    }
}

/// `max(eps_prev * f_eps^e, floor)`, applied after training episode `e`.
pub fn anneal_epsilon(eps_prev: f64, f_eps: f64, e: u64, floor: f64) -> f64 {
    (eps_prev * f_eps.powf(e as f64)).max(floor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UeStep {
    pub o: UeObservation,
    pub a: ChannelAction,
    pub n: UplinkMessage,
    pub m: DownlinkMessage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub ues: Vec<UeStep>,
    /// Channel outcome of this slot's transmissions.
    pub bs_obs: BsObservation,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TraceMeta {
    pub config_hash: String,
    pub seed: u64,
    pub session: usize,
    pub episode: usize,
    pub mode: Option<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub meta: TraceMeta,
    pub num_ues: usize,
    pub steps: Vec<TraceStep>,
    pub total_return: f64,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn had_collision(&self) -> bool {
        let c = BsObservation::collision(self.num_ues);
        self.steps.iter().any(|s| s.bs_obs == c)
    }
}

#[derive(Debug, Clone)]
struct UeAgent {
    memory: MemoryWindow,
    last_dl: DownlinkMessage,
    last_action: ChannelAction,
}

impl UeAgent {
    fn new(memory_len: usize) -> Self {
        UeAgent {
            memory: MemoryWindow::new(memory_len),
            last_dl: DownlinkMessage::Null,
            last_action: ChannelAction::Nothing,
        }
    }
}

enum Tables<'a> {
    Learn(&'a mut QTables),
    Frozen(&'a QTables),
}

impl Tables<'_> {
    fn read(&self) -> &QTables {
        match self {
            Tables::Learn(q) => q,
            Tables::Frozen(q) => q,
        }
    }
}

struct EpisodeRun {
    total_return: f64,
    steps: Option<Vec<TraceStep>>,
}

fn drive<R: Rng + ?Sized>(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    mut tables: Tables<'_>,
    epsilon: f64,
    record: bool,
    rng: &mut R,
) -> Result<EpisodeRun> {
    let (mut env, mut obs, mut bs_input) = Env::reset(env_config)?;
    let n = env_config.num_ues;
    let kind = cfg.agent_kind;
    let mut agents = vec![UeAgent::new(cfg.memory_len); n];
    let mut keys = vec![StateKey(0); n];
    let mut actions = vec![ChannelAction::Nothing; n];
    let mut msgs = vec![UplinkMessage::Null; n];
    let mut steps = record.then(|| Vec::with_capacity(env_config.t_max));
    let mut total = 0.0;

    while !env.is_done() {
        for u in 0..n {
            let ag = &agents[u];
            let (a, m) = match kind {
                AgentKind::Learner => {
                    keys[u] = StateKey::new(obs[u], &ag.memory);
                    select_actions(tables.read(), &keys[u], epsilon, rng)
                }
                AgentKind::ExpertUe => (
                    expert_channel_access(obs[u], ag.last_dl, ag.last_action),
                    expert_signaling(obs[u], ag.last_dl),
                ),
                AgentKind::HandCodedPi1 => {
                    (fire_and_delete(obs[u], ag.last_action), UplinkMessage::Null)
                }
                AgentKind::HandCodedPi2 => {
                    (transmit_until_ack(obs[u], ag.last_dl), UplinkMessage::Null)
                }
            };
            actions[u] = a;
            msgs[u] = m;
        }

        let out = env.step(&actions, rng)?;
        let dl = bs_policy(bs_input, &msgs, rng).dl_messages;
        bs_input = out.bs_obs;
        total += out.reward;

        if let Some(steps) = steps.as_mut() {
            steps.push(TraceStep {
                t: steps.len(),
                ues: (0..n)
                    .map(|u| UeStep {
                        o: obs[u],
                        a: actions[u],
                        n: msgs[u],
                        m: dl[u],
                    })
                    .collect(),
                bs_obs: out.bs_obs,
                reward: out.reward,
            });
        }

        for u in 0..n {
            let ag = &mut agents[u];
            ag.memory.push(MemoryRecord {
                m: dl[u],
                a: actions[u],
                n: msgs[u],
                o: obs[u],
            });
            ag.last_dl = dl[u];
            ag.last_action = actions[u];
        }

        if let (Tables::Learn(q), AgentKind::Learner) = (&mut tables, kind) {
            for u in 0..n {
                let tr = Transition {
                    state: keys[u],
                    action: actions[u],
                    message: msgs[u],
                    reward: out.reward,
                    next_state: StateKey::new(out.ue_obs[u], &agents[u].memory),
                    terminal: out.done,
                };
                q_update(q, &tr, cfg.alpha, cfg.gamma)?;
            }
        }

        obs = out.ue_obs;
    }

    Ok(EpisodeRun {
        total_return: total,
        steps,
    })
}

/// Plays one episode and records its full trace.
///
/// In [`Mode::Train`] the shared tables are updated after every slot with
/// each UE's transition. In [`Mode::Eval`] the tables are only read and
/// exploration is switched off regardless of `epsilon`.
pub fn run_episode<R: Rng + ?Sized>(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    q: &mut QTables,
    epsilon: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let run = match mode {
        Mode::Train => drive(env_config, cfg, Tables::Learn(q), epsilon, true, rng)?,
        Mode::Eval => drive(env_config, cfg, Tables::Frozen(q), 0.0, true, rng)?,
    };
    Ok(EpisodeTrace {
        meta: TraceMeta {
            mode: Some(mode),
            ..TraceMeta::default()
        },
        num_ues: env_config.num_ues,
        steps: run.steps.unwrap_or_default(),
        total_return: run.total_return,
    })
}

/// Greedy episode with read-only tables.
pub fn eval_episode<R: Rng + ?Sized>(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    q: &QTables,
    rng: &mut R,
) -> Result<EpisodeTrace> {
    let run = drive(env_config, cfg, Tables::Frozen(q), 0.0, true, rng)?;
    Ok(EpisodeTrace {
        meta: TraceMeta {
            mode: Some(Mode::Eval),
            ..TraceMeta::default()
        },
        num_ues: env_config.num_ues,
        steps: run.steps.unwrap_or_default(),
        total_return: run.total_return,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub ret: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct SessionResult {
    pub session: usize,
    pub learning_curve: Vec<CurvePoint>,
    pub eval_returns: Vec<f64>,
    pub mean_eval: f64,
    pub traces: Vec<EpisodeTrace>,
    pub tables: QTables,
}

/// Trains fresh tables for `n_tr` episodes with annealed exploration.
pub fn train_tables<R: Rng + ?Sized>(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<(QTables, Vec<CurvePoint>)> {
    env_config.validate()?;
    cfg.validate()?;
    let mut q = QTables::new(cfg.memory_len);
    let mut curve = Vec::with_capacity(cfg.n_tr);
    let mut eps = 1.0;
    for e in 1..=cfg.n_tr {
        let run = drive(env_config, cfg, Tables::Learn(&mut q), eps, false, rng)?;
        curve.push(CurvePoint {
            episode: e,
            ret: run.total_return,
            epsilon: eps,
        });
        eps = anneal_epsilon(eps, cfg.f_eps, e as u64, cfg.eps_floor);
    }
    Ok((q, curve))
}

fn session_at(
    train_env: &EnvConfig,
    eval_env: &EnvConfig,
    cfg: &TrainConfig,
    session: usize,
) -> Result<SessionResult> {
    eval_env.validate()?;
    let mut rng = stream_rng(cfg.seed, session as u64);
    let (tables, learning_curve) = train_tables(train_env, cfg, &mut rng)?;
    let hash = config_hash(eval_env, cfg);
    let mut traces = Vec::with_capacity(cfg.n_eval);
    for episode in 0..cfg.n_eval {
        let mut tr = eval_episode(eval_env, cfg, &tables, &mut rng)?;
        tr.meta = TraceMeta {
            config_hash: hash.clone(),
            seed: cfg.seed,
            session,
            episode,
            mode: Some(Mode::Eval),
        };
        traces.push(tr);
    }
    let eval_returns: Vec<f64> = traces.iter().map(|t| t.total_return).collect();
    let mean_eval = eval_returns.iter().sum::<f64>() / eval_returns.len() as f64;
    Ok(SessionResult {
        session,
        learning_curve,
        eval_returns,
        mean_eval,
        traces,
        tables,
    })
}

/// `n_tr` training episodes followed by `n_eval` greedy evaluation episodes.
pub fn run_session(env_config: &EnvConfig, cfg: &TrainConfig) -> Result<SessionResult> {
    session_at(env_config, env_config, cfg, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
    pub best: f64,
}

impl Aggregate {
    /// Mean, standard error of the mean (sample std / sqrt(n)) and maximum.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_err = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Aggregate {
            n,
            mean,
            std_err,
            best,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub sessions: Vec<SessionResult>,
    pub aggregate: Aggregate,
}

impl ExperimentResult {
    pub fn best_session(&self) -> &SessionResult {
        self.sessions
            .iter()
            .max_by(|a, b| a.mean_eval.total_cmp(&b.mean_eval))
            .expect("at least one session")
    }
}

/// Train on `train_env`, evaluate the frozen tables on `eval_env`; `n_rep`
/// sessions, session `i` seeded from stream `i` of the master seed.
pub fn run_generalization_with(
    train_env: &EnvConfig,
    eval_env: &EnvConfig,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<ExperimentResult> {
    train_env.validate()?;
    eval_env.validate()?;
    cfg.validate()?;
    let sessions = exec
        .map(cfg.n_rep, |i| session_at(train_env, eval_env, cfg, i))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = sessions.iter().map(|s| s.mean_eval).collect();
    Ok(ExperimentResult {
        aggregate: Aggregate::from_values(&means),
        sessions,
    })
}

pub fn run_generalization(
    train_env: &EnvConfig,
    eval_env: &EnvConfig,
    cfg: &TrainConfig,
) -> Result<ExperimentResult> {
    run_generalization_with(train_env, eval_env, cfg, Exec::default())
}

pub fn run_experiment_with(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<ExperimentResult> {
    run_generalization_with(env_config, env_config, cfg, exec)
}

/// `n_rep` independent sessions aggregated over their mean eval returns.
pub fn run_experiment(env_config: &EnvConfig, cfg: &TrainConfig) -> Result<ExperimentResult> {
    run_experiment_with(env_config, cfg, Exec::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub alpha: Vec<f64>,
    pub gamma: Vec<f64>,
    pub f_eps: Vec<f64>,
    pub memory_len: Vec<usize>,
}

impl Grid {
    /// Singleton grid around `base`.
    pub fn around(base: &TrainConfig) -> Self {
        Grid {
            alpha: vec![base.alpha],
            gamma: vec![base.gamma],
            f_eps: vec![base.f_eps],
            memory_len: vec![base.memory_len],
        }
    }

    /// Cartesian product in row-major order (alpha outermost).
    pub fn cells(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &gamma in &self.gamma {
                for &f_eps in &self.f_eps {
                    for &memory_len in &self.memory_len {
                        out.push(TrainConfig {
                            alpha,
                            gamma,
                            f_eps,
                            memory_len,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub alpha: f64,
    pub gamma: f64,
    pub f_eps: f64,
    pub memory_len: usize,
    pub aggregate: Aggregate,
}

/// One [`run_experiment`] per grid cell, every cell using the master seed of
/// `base` so cells see common random numbers.
pub fn grid_search_with(
    env_config: &EnvConfig,
    base: &TrainConfig,
    grid: &Grid,
    exec: Exec,
) -> Result<Vec<GridRow>> {
    let cells = grid.cells(base);
    exec.map(cells.len(), |i| {
        let c = &cells[i];
        let res = run_experiment_with(env_config, c, exec)?;
        Ok(GridRow {
            alpha: c.alpha,
            gamma: c.gamma,
            f_eps: c.f_eps,
            memory_len: c.memory_len,
            aggregate: res.aggregate,
        })
    })
    .into_iter()
    .collect()
}

pub fn grid_search(
    env_config: &EnvConfig,
    base: &TrainConfig,
    grid: &Grid,
) -> Result<Vec<GridRow>> {
    grid_search_with(env_config, base, grid, Exec::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStats {
    pub episodes: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_err: f64,
}

/// Episodes per RNG stream in [`monte_carlo_returns`].
pub const MC_CHUNK: usize = 4096;

/// Return statistics of a fixed (non-learning, or frozen-table) policy over
/// many episodes. Chunk `j` of [`MC_CHUNK`] episodes uses stream `j`.
pub fn monte_carlo_returns(
    env_config: &EnvConfig,
    cfg: &TrainConfig,
    q: &QTables,
    episodes: usize,
    exec: Exec,
) -> Result<ReturnStats> {
    env_config.validate()?;
    cfg.validate()?;
    let chunks = episodes.div_ceil(MC_CHUNK);
    let partial = exec.map(chunks, |j| -> Result<(f64, f64)> {
        let mut rng = stream_rng(cfg.seed, j as u64);
        let count = MC_CHUNK.min(episodes - j * MC_CHUNK);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..count {
            let r = drive(env_config, cfg, Tables::Frozen(q), 0.0, false, &mut rng)?.total_return;
            s += r;
            s2 += r * r;
        }
        Ok((s, s2))
    });
    let (mut sum, mut sum2) = (0.0, 0.0);
    for p in partial {
        let (s, s2) = p?;
        sum += s;
        sum2 += s2;
    }
    let n = episodes as f64;
    let mean = sum / n;
    let var = if episodes > 1 {
        ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(ReturnStats {
        episodes,
        mean,
        std_dev: var.sqrt(),
        std_err: (var / n).sqrt(),
    })
}
