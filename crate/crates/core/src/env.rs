//! Slot-synchronous uplink environment: a shared packet-erasure data channel,
//! one transmit buffer per UE, and the cooperative termination rule.
//!
//! Transmitting never removes an SDU; the UE must delete it explicitly. An
//! episode ends once every UE has generated all of its SDUs, each of them has
//! reached the base station at least once, and every buffer is empty, or when
//! `t_max` slots have elapsed.

use crate::error::{Error, Result};
use crate::types::{BsObservation, ChannelAction, UeObservation};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Reward handed to every UE on every slot.
pub const STEP_REWARD: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrafficMode {
    /// All `P` SDUs sit in the buffer at `t = 0`.
    FullBufferStart,
    /// Buffers start empty; each slot one SDU arrives with `arrival_prob`
    /// until `P` have been generated.
    EmptyBufferStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub num_ues: usize,
    pub sdus_per_ue: usize,
    pub bler: f64,
    pub t_max: usize,
    pub buffer_capacity: usize,
    pub traffic_mode: TrafficMode,
    pub arrival_prob: f64,
}

impl EnvConfig {
    /// Full-buffer scenario with `L = P` and the default arrival probability.
    pub fn new(num_ues: usize, sdus_per_ue: usize, bler: f64, t_max: usize) -> Self {
        EnvConfig {
            num_ues,
            sdus_per_ue,
            bler,
            t_max,
            buffer_capacity: sdus_per_ue,
            traffic_mode: TrafficMode::FullBufferStart,
            arrival_prob: 0.5,
        }
    }

    pub fn with_traffic(mut self, mode: TrafficMode) -> Self {
        self.traffic_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_ues == 0 {
            return Err(Error::invalid("num_ues", "must be at least 1"));
        }
        if self.num_ues > 254 {
            return Err(Error::invalid("num_ues", "must be at most 254"));
        }
        if self.sdus_per_ue == 0 {
            return Err(Error::invalid("sdus_per_ue", "must be at least 1"));
        }
        if self.t_max == 0 {
            return Err(Error::invalid("t_max", "must be at least 1"));
        }
        if self.buffer_capacity < self.sdus_per_ue {
            return Err(Error::invalid(
                "buffer_capacity",
                format!(
                    "{} is smaller than sdus_per_ue ({})",
                    self.buffer_capacity, self.sdus_per_ue
                ),
            ));
        }
        // StateKey stores an observation in one byte.
        if self.buffer_capacity > u8::MAX as usize {
            return Err(Error::invalid("buffer_capacity", "must be at most 255"));
        }
        if !(0.0..=1.0).contains(&self.bler) {
            return Err(Error::invalid(
                "bler",
                format!("{} is outside [0, 1]", self.bler),
            ));
        }
        if !(0.0..=1.0).contains(&self.arrival_prob) {
            return Err(Error::invalid(
                "arrival_prob",
                format!("{} is outside [0, 1]", self.arrival_prob),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SduRecord {
    pub sdu_index: usize,
    pub delivered: bool,
}

/// Transmit-side bookkeeping of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct UeBuffer {
    pub sdus: VecDeque<SduRecord>,
    pub generated_count: usize,
    /// Whether SDU `i` has ever been received by the base station.
    pub delivered_flags: Vec<bool>,
}

impl UeBuffer {
    fn new(sdus_per_ue: usize, full: bool) -> Self {
        let mut buf = UeBuffer {
            sdus: VecDeque::with_capacity(sdus_per_ue),
            generated_count: 0,
            delivered_flags: vec![false; sdus_per_ue],
        };
        if full {
            for _ in 0..sdus_per_ue {
                buf.generate();
            }
        }
        buf
    }

    fn generate(&mut self) {
        self.sdus.push_back(SduRecord {
            sdu_index: self.generated_count,
            delivered: false,
        });
        self.generated_count += 1;
    }

    pub fn len(&self) -> usize {
        self.sdus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sdus.is_empty()
    }

    fn finished(&self, sdus_per_ue: usize) -> bool {
        self.generated_count == sdus_per_ue
            && self.sdus.is_empty()
            && self.delivered_flags.iter().all(|&d| d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub t: usize,
    pub ues: Vec<UeBuffer>,
    pub done: bool,
}

/// Everything the UEs and the BS learn at the end of a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub ue_obs: Vec<UeObservation>,
    pub bs_obs: BsObservation,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: EnvState,
}

impl Env {
    /// Starts a new episode. The initial state is deterministic; randomness
    /// only enters through [`Env::step`].
    pub fn reset(config: &EnvConfig) -> Result<(Env, Vec<UeObservation>, BsObservation)> {
        config.validate()?;
        let full = config.traffic_mode == TrafficMode::FullBufferStart;
        let ues = (0..config.num_ues)
            .map(|_| UeBuffer::new(config.sdus_per_ue, full))
            .collect();
        let mut env = Env {
            config: config.clone(),
            state: EnvState {
                t: 0,
                ues,
                done: false,
            },
        };
        env.state.done = env.terminal();
        let obs = env.observations();
        Ok((env, obs, BsObservation::IDLE))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.done
    }

    pub fn observations(&self) -> Vec<UeObservation> {
        self.state
            .ues
            .iter()
            .map(|b| UeObservation(b.len() as u32))
            .collect()
    }

    fn terminal(&self) -> bool {
        self.state.t >= self.config.t_max
            || self
                .state
                .ues
                .iter()
                .all(|b| b.finished(self.config.sdus_per_ue))
    }

    /// Executes one slot of joint channel actions.
    ///
    /// Random draws happen in a fixed order: one erasure draw when exactly
    /// one UE transmits, then one arrival draw per UE (in UE order) that is
    /// still generating traffic.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        actions: &[ChannelAction],
        rng: &mut R,
    ) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::EpisodeDone { t: self.state.t });
        }
        let n = self.config.num_ues;
        if actions.len() != n {
            return Err(Error::ActionCount {
                expected: n,
                got: actions.len(),
            });
        }

        let mut transmitter = None;
        let mut transmitters = 0usize;
        for (u, (&a, buf)) in actions.iter().zip(&self.state.ues).enumerate() {
            if a == ChannelAction::Transmit && !buf.is_empty() {
                transmitters += 1;
                transmitter = Some(u);
            }
        }

        let bs_obs = match (transmitters, transmitter) {
            (1, Some(u)) => {
                if rng.gen::<f64>() < self.config.bler {
                    BsObservation::IDLE
                } else {
                    let buf = &mut self.state.ues[u];
                    let head = buf.sdus.front_mut().expect("transmitter has data");
                    head.delivered = true;
                    buf.delivered_flags[head.sdu_index] = true;
                    BsObservation::received(u)
                }
            }
            (0, _) => BsObservation::IDLE,
            _ => BsObservation::collision(n),
        };

        for (&a, buf) in actions.iter().zip(self.state.ues.iter_mut()) {
            if a == ChannelAction::Delete {
                buf.sdus.pop_front();
            }
        }

        if self.config.traffic_mode == TrafficMode::EmptyBufferStart {
            let p = self.config.sdus_per_ue;
            for buf in self.state.ues.iter_mut() {
                if buf.generated_count < p && rng.gen::<f64>() < self.config.arrival_prob {
                    buf.generate();
                }
            }
        }

        self.state.t += 1;
        self.state.done = self.terminal();
        Ok(StepOutcome {
            reward: STEP_REWARD,
            ue_obs: self.observations(),
            bs_obs,
            done: self.state.done,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ChannelAction::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn reset_full_buffer() {
        let (env, obs, bs) = Env::reset(&EnvConfig::new(2, 2, 0.0, 8)).unwrap();
        assert_eq!(obs, vec![UeObservation(2), UeObservation(2)]);
        assert_eq!(bs, BsObservation::IDLE);
        assert!(!env.is_done());
        assert_eq!(env.state().ues[0].generated_count, 2);
    }

    #[test]
    fn reset_empty_buffer() {
        let cfg = EnvConfig::new(1, 1, 0.0, 8).with_traffic(TrafficMode::EmptyBufferStart);
        let (env, obs, bs) = Env::reset(&cfg).unwrap();
        assert_eq!(obs, vec![UeObservation(0)]);
        assert_eq!(bs, BsObservation::IDLE);
        assert_eq!(env.state().ues[0].generated_count, 0);
    }

    #[test]
    fn reset_not_done_with_pending_sdus() {
        let (env, _, _) = Env::reset(&EnvConfig::new(2, 1, 0.0, 8)).unwrap();
        assert!(!env.is_done());
    }

    #[test]
    fn invalid_configs_name_the_key() {
        let mut c = EnvConfig::new(1, 2, 0.0, 4);
        c.buffer_capacity = 1;
        assert!(
            matches!(Env::reset(&c), Err(Error::InvalidConfig { key, .. }) if key == "buffer_capacity")
        );
        let c = EnvConfig::new(1, 1, 1.5, 4);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig { key, .. }) if key == "bler"));
        let c = EnvConfig::new(0, 1, 0.0, 4);
        assert!(matches!(c.validate(), Err(Error::InvalidConfig { key, .. }) if key == "num_ues"));
    }

    #[test]
    fn collision_when_both_transmit() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(2, 1, 0.0, 8)).unwrap();
        let out = env.step(&[Transmit, Transmit], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation(3));
        assert!(env.state().ues.iter().all(|b| !b.delivered_flags[0]));
    }

    #[test]
    fn lone_transmission_without_erasure_is_received() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(1, 1, 0.0, 8)).unwrap();
        let out = env.step(&[Transmit], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation(1));
        assert_eq!(out.ue_obs, vec![UeObservation(1)]);
        assert!(env.state().ues[0].delivered_flags[0]);
        assert!(env.state().ues[0].sdus[0].delivered);
        assert_eq!(out.reward, -1.0);
    }

    #[test]
    fn transmit_and_delete_on_different_ues() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(2, 2, 0.0, 8)).unwrap();
        let out = env.step(&[Transmit, Delete], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation(1));
        assert_eq!(out.ue_obs, vec![UeObservation(2), UeObservation(1)]);
    }

    #[test]
    fn transmit_on_empty_buffer_is_idle() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(2, 1, 0.0, 8)).unwrap();
        env.step(&[Delete, Nothing], &mut rng()).unwrap();
        let out = env.step(&[Transmit, Nothing], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation::IDLE);
        // UE 0 empty, UE 1 transmits alone: no collision.
        let out = env.step(&[Transmit, Transmit], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation(2));
    }

    #[test]
    fn transmit_then_delete_terminates_in_two_steps() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(1, 1, 0.0, 32)).unwrap();
        let mut r = rng();
        let a = env.step(&[Transmit], &mut r).unwrap();
        assert!(!a.done);
        let b = env.step(&[Delete], &mut r).unwrap();
        assert!(b.done);
        assert_eq!(a.reward + b.reward, -2.0);
        assert!(matches!(
            env.step(&[Nothing], &mut r),
            Err(Error::EpisodeDone { t: 2 })
        ));
    }

    #[test]
    fn deleting_undelivered_sdu_runs_to_t_max() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(1, 1, 0.0, 5)).unwrap();
        let mut r = rng();
        let mut total = 0.0;
        let mut steps = 0;
        let mut action = Delete;
        while !env.is_done() {
            total += env.step(&[action], &mut r).unwrap().reward;
            action = Transmit;
            steps += 1;
        }
        assert_eq!(steps, 5);
        assert_eq!(total, -5.0);
    }

    #[test]
    fn wrong_action_count_is_rejected() {
        let (mut env, _, _) = Env::reset(&EnvConfig::new(2, 1, 0.0, 8)).unwrap();
        assert!(matches!(
            env.step(&[Transmit], &mut rng()),
            Err(Error::ActionCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn arrivals_are_not_transmittable_in_the_same_slot() {
        let mut cfg = EnvConfig::new(1, 1, 0.0, 8).with_traffic(TrafficMode::EmptyBufferStart);
        cfg.arrival_prob = 1.0;
        let (mut env, _, _) = Env::reset(&cfg).unwrap();
        let out = env.step(&[Transmit], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation::IDLE);
        assert_eq!(out.ue_obs, vec![UeObservation(1)]);
        let out = env.step(&[Transmit], &mut rng()).unwrap();
        assert_eq!(out.bs_obs, BsObservation(1));
    }

    #[test]
    fn erasure_rate_matches_bler() {
        let bler = 0.3;
        let trials = 100_000usize;
        let mut r = ChaCha8Rng::seed_from_u64(11);
        let cfg = EnvConfig::new(1, 1, bler, 2);
        let mut delivered = 0usize;
        for _ in 0..trials {
            let (mut env, _, _) = Env::reset(&cfg).unwrap();
            if env.step(&[Transmit], &mut r).unwrap().bs_obs == BsObservation(1) {
                delivered += 1;
            }
        }
        let p = 1.0 - bler;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        let diff = (delivered as f64 - trials as f64 * p).abs();
        assert!(
            diff < 3.0 * sd,
            "delivered {delivered}, expected {}",
            trials as f64 * p
        );
    }
}
