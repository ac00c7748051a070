//! Tabular MAC learner: fingerprint memory, the state key built from it, the
//! pair of Q-tables (channel access and signaling) and the update rule.

use crate::error::{Error, Result};
use crate::types::{ChannelAction, DownlinkMessage, UeObservation, UplinkMessage};
use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::VecDeque;

/// Longest memory a [`StateKey`] can encode.
pub const MAX_MEMORY_LEN: usize = 7;

/// One past slot as seen by a UE: the DL message it got, the channel action
/// and UL message it chose, and the buffer observation it acted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub m: DownlinkMessage,
    pub a: ChannelAction,
    pub n: UplinkMessage,
    pub o: UeObservation,
}

impl MemoryRecord {
    /// Filler used before any real history exists.
    pub const SENTINEL: MemoryRecord = MemoryRecord {
        m: DownlinkMessage::Null,
        a: ChannelAction::Nothing,
        n: UplinkMessage::Null,
        o: UeObservation(0),
    };

    fn pack(self) -> u16 {
        let msg = (self.m.index() * 6 + self.a.index() * 2 + self.n.index()) as u16;
        (msg << 8) | (self.o.0 as u16 & 0xff)
    }

    fn unpack(bits: u16) -> Option<Self> {
        let msg = (bits >> 8) as usize;
        if msg >= 18 {
            return None;
        }
        Some(MemoryRecord {
            m: DownlinkMessage::from_index(msg / 6)?,
            a: ChannelAction::from_index((msg / 2) % 3)?,
            n: UplinkMessage::from_index(msg % 2)?,
            o: UeObservation((bits & 0xff) as u32),
        })
    }
}

/// Fixed-length FIFO of the last `N` records, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryWindow {
    records: VecDeque<MemoryRecord>,
}

impl MemoryWindow {
    pub fn new(len: usize) -> Self {
        MemoryWindow {
            records: std::iter::repeat_n(MemoryRecord::SENTINEL, len).collect(),
        }
    }

    pub fn from_records(records: impl IntoIterator<Item = MemoryRecord>) -> Self {
        MemoryWindow {
            records: records.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, rec: MemoryRecord) {
        if self.records.is_empty() {
            return;
        }
        self.records.pop_front();
        self.records.push_back(rec);
    }

    pub fn records(&self) -> impl Iterator<Item = &MemoryRecord> {
        self.records.iter()
    }

    pub fn latest(&self) -> Option<&MemoryRecord> {
        self.records.back()
    }
}

/// Injective packing of `(o_t, h_t)` for a fixed memory length.
///
/// Bits `0..8` hold the current observation; record `i` of the window
/// (oldest first) occupies bits `8 + 16 i .. 24 + 16 i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateKey(pub u128);

impl StateKey {
    pub fn new(obs: UeObservation, memory: &MemoryWindow) -> Self {
        debug_assert!(memory.len() <= MAX_MEMORY_LEN);
        let mut key = (obs.0 as u128) & 0xff;
        for (i, rec) in memory.records().enumerate() {
            key |= (rec.pack() as u128) << (8 + 16 * i);
        }
        StateKey(key)
    }

    pub fn decode(self, memory_len: usize) -> Option<(UeObservation, MemoryWindow)> {
        if memory_len > MAX_MEMORY_LEN || self.0 >> (8 + 16 * memory_len) != 0 {
            return None;
        }
        let obs = UeObservation((self.0 & 0xff) as u32);
        let records = (0..memory_len)
            .map(|i| MemoryRecord::unpack((self.0 >> (8 + 16 * i)) as u16))
            .collect::<Option<Vec<_>>>()?;
        Some((obs, MemoryWindow::from_records(records)))
    }
}

/// Shared pair of value tables. Unseen states read as `default_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTables {
    pub memory_len: usize,
    pub default_value: f64,
    pub(crate) q_p: FxHashMap<StateKey, [f64; 3]>,
    pub(crate) q_s: FxHashMap<StateKey, [f64; 2]>,
}

impl QTables {
    pub fn new(memory_len: usize) -> Self {
        Self::with_default(memory_len, 0.0)
    }

    pub fn with_default(memory_len: usize, default_value: f64) -> Self {
        QTables {
            memory_len,
            default_value,
            q_p: FxHashMap::default(),
            q_s: FxHashMap::default(),
        }
    }

    pub fn access_values(&self, s: &StateKey) -> [f64; 3] {
        self.q_p.get(s).copied().unwrap_or([self.default_value; 3])
    }

    pub fn signaling_values(&self, s: &StateKey) -> [f64; 2] {
        self.q_s.get(s).copied().unwrap_or([self.default_value; 2])
    }

    pub fn set_access_values(&mut self, s: StateKey, v: [f64; 3]) {
        self.q_p.insert(s, v);
    }

    pub fn set_signaling_values(&mut self, s: StateKey, v: [f64; 2]) {
        self.q_s.insert(s, v);
    }

    /// Number of materialized states (union over both tables).
    pub fn num_states(&self) -> usize {
        let extra = self
            .q_s
            .keys()
            .filter(|k| !self.q_p.contains_key(k))
            .count();
        self.q_p.len() + extra
    }

    pub fn is_empty(&self) -> bool {
        self.q_p.is_empty() && self.q_s.is_empty()
    }

    pub fn access_entries(&self) -> Vec<(StateKey, [f64; 3])> {
        let mut v: Vec<_> = self.q_p.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    pub fn signaling_entries(&self) -> Vec<(StateKey, [f64; 2])> {
        let mut v: Vec<_> = self.q_s.iter().map(|(k, v)| (*k, *v)).collect();
        v.sort_unstable_by_key(|e| e.0);
        v
    }

    /// SHA-256 over the bit patterns of every entry in key order.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.memory_len as u64).to_le_bytes());
        h.update(self.default_value.to_bits().to_le_bytes());
        for (k, v) in self.access_entries() {
            h.update(k.0.to_le_bytes());
            v.iter().for_each(|x| h.update(x.to_bits().to_le_bytes()));
        }
        h.update(b"|");
        for (k, v) in self.signaling_entries() {
            h.update(k.0.to_le_bytes());
            v.iter().for_each(|x| h.update(x.to_bits().to_le_bytes()));
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Index of a maximal entry, ties broken uniformly at random.
pub fn argmax_random_tie<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut ties = [0usize; 8];
    let mut k = 0;
    for (i, &v) in values.iter().enumerate() {
        if v == best {
            ties[k] = i;
            k += 1;
        }
    }
    match k {
        0 | 1 => ties[0],
        _ => ties[rng.gen_range(0..k)],
    }
}

fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        rng.gen_range(0..values.len())
    } else {
        argmax_random_tie(values, rng)
    }
}

/// Draws the channel action and the UL message for state `s`. Both tables
/// are queried at the same key but explore independently.
pub fn select_actions<R: Rng + ?Sized>(
    q: &QTables,
    s: &StateKey,
    epsilon: f64,
    rng: &mut R,
) -> (ChannelAction, UplinkMessage) {
    let a = epsilon_greedy(&q.access_values(s), epsilon, rng);
    let n = epsilon_greedy(&q.signaling_values(s), epsilon, rng);
    (
        ChannelAction::from_index(a).expect("index within alphabet"),
        UplinkMessage::from_index(n).expect("index within alphabet"),
    )
}

/// One transition as seen by a single UE.
#[derive(Debug, Clone, Copy)]
pub struct Transition {
    pub state: StateKey,
    pub action: ChannelAction,
    pub message: UplinkMessage,
    pub reward: f64,
    pub next_state: StateKey,
    pub terminal: bool,
}

/// Q-learning update applied to both tables with the same reward and
/// successor state. The bootstrap term is zero on terminal transitions.
pub fn q_update(q: &mut QTables, tr: &Transition, alpha: f64, gamma: f64) -> Result<()> {
    if !tr.reward.is_finite() {
        return Err(Error::NonFinite("reward"));
    }
    if !alpha.is_finite() {
        return Err(Error::NonFinite("alpha"));
    }
    if !gamma.is_finite() {
        return Err(Error::NonFinite("gamma"));
    }

    let (boot_p, boot_s) = if tr.terminal {
        (0.0, 0.0)
    } else {
        let p = q.access_values(&tr.next_state);
        let s = q.signaling_values(&tr.next_state);
        (
            gamma * p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            gamma * s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };

    let d = q.default_value;
    let cell = &mut q.q_p.entry(tr.state).or_insert([d; 3])[tr.action.index()];
    *cell += alpha * (tr.reward + boot_p - *cell);
    let cell = &mut q.q_s.entry(tr.state).or_insert([d; 2])[tr.message.index()];
    *cell += alpha * (tr.reward + boot_s - *cell);
    Ok(())
}
