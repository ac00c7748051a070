//! Property checks shared by the `properties` and `acceptance` targets.

#![allow(dead_code)]

use macsim::analysis::pearson;
use macsim::learner::{
    argmax_random_tie, q_update, MemoryRecord, MemoryWindow, StateKey, Transition,
};
use macsim::trainer::anneal_epsilon;
use macsim::types::ChannelEvent;
use macsim::{
    ChannelAction, DownlinkMessage, Env, EnvConfig, QTables, UeObservation, UplinkMessage,
};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn action() -> impl Strategy<Value = ChannelAction> {
    (0..3usize).prop_map(|i| ChannelAction::from_index(i).unwrap())
}

pub fn record() -> impl Strategy<Value = MemoryRecord> {
    (0..3usize, 0..3usize, 0..2usize, 0..4u32).prop_map(|(m, a, n, o)| MemoryRecord {
        m: DownlinkMessage::from_index(m).unwrap(),
        a: ChannelAction::from_index(a).unwrap(),
        n: UplinkMessage::from_index(n).unwrap(),
        o: UeObservation(o),
    })
}

/// Joint actions for `num_ues` UEs, several slots long.
pub fn scenario() -> impl Strategy<Value = (usize, usize, Vec<Vec<ChannelAction>>, u64)> {
    (1..=5usize, 1..=3usize).prop_flat_map(|(n, p)| {
        (
            Just(n),
            Just(p),
            prop::collection::vec(prop::collection::vec(action(), n), 1..24),
            any::<u64>(),
        )
    })
}

/// With bler 0, one non-empty transmitter is received, two or more collide
/// and nobody is credited, none leaves the channel idle.
pub fn collision_semantics(
    num_ues: usize,
    sdus: usize,
    slots: &[Vec<ChannelAction>],
    seed: u64,
) -> Result<(), TestCaseError> {
    let cfg = EnvConfig::new(num_ues, sdus, 0.0, 64);
    let (mut env, _, _) = Env::reset(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for acts in slots {
        if env.is_done() {
            break;
        }
        let before = env.state().clone();
        let tx: Vec<usize> = (0..num_ues)
            .filter(|&u| acts[u] == ChannelAction::Transmit && !before.ues[u].is_empty())
            .collect();
        let out = env.step(acts, &mut rng).unwrap();
        prop_assert_eq!(out.reward, -1.0);
        let after = env.state();
        match tx.len() {
            0 => prop_assert_eq!(out.bs_obs.event(num_ues), ChannelEvent::Idle),
            1 => {
                let u = tx[0];
                prop_assert_eq!(out.bs_obs.event(num_ues), ChannelEvent::Received(u));
                let head = before.ues[u].sdus.front().unwrap().sdu_index;
                prop_assert!(after.ues[u].delivered_flags[head]);
            }
            _ => {
                prop_assert_eq!(out.bs_obs.event(num_ues), ChannelEvent::Collision);
                for u in 0..num_ues {
                    prop_assert_eq!(
                        &after.ues[u].delivered_flags,
                        &before.ues[u].delivered_flags
                    );
                }
            }
        }
    }
    Ok(())
}

/// Full-buffer start: buffers only shrink, and only by one on a delete of a
/// non-empty buffer; delivered flags never revert.
pub fn buffer_monotone(
    num_ues: usize,
    sdus: usize,
    slots: &[Vec<ChannelAction>],
    seed: u64,
    bler: f64,
) -> Result<(), TestCaseError> {
    let cfg = EnvConfig::new(num_ues, sdus, bler, 64);
    let (mut env, obs, _) = Env::reset(&cfg).unwrap();
    prop_assert!(obs.iter().all(|o| o.remaining() == sdus));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for acts in slots {
        if env.is_done() {
            break;
        }
        let before = env.state().clone();
        let out = env.step(acts, &mut rng).unwrap();
        let after = env.state();
        for (u, &act) in acts.iter().enumerate() {
            let (b, a) = (before.ues[u].len(), after.ues[u].len());
            let expect = if act == ChannelAction::Delete && b > 0 {
                b - 1
            } else {
                b
            };
            prop_assert_eq!(a, expect);
            prop_assert_eq!(out.ue_obs[u].remaining(), a);
            for (x, y) in before.ues[u]
                .delivered_flags
                .iter()
                .zip(&after.ues[u].delivered_flags)
            {
                prop_assert!(!*x || *y);
            }
        }
    }
    Ok(())
}

pub fn epsilon_schedule(f_eps: f64, floor: f64) -> Result<(), TestCaseError> {
    let mut eps = 1.0;
    for e in 1..=20_000u64 {
        let next = anneal_epsilon(eps, f_eps, e, floor);
        prop_assert!(next <= eps);
        prop_assert!(next >= floor);
        eps = next;
    }
    prop_assert_eq!(eps, floor);
    Ok(())
}

/// A cell already equal to its target is left untouched, and repeated
/// updates toward a terminal reward contract geometrically.
pub fn q_fixed_point(
    r: f64,
    alpha: f64,
    gamma: f64,
    next: [f64; 3],
    start: f64,
) -> Result<(), TestCaseError> {
    let s = StateKey(1);
    let s2 = StateKey(2);
    let mut q = QTables::new(0);
    q.set_access_values(s2, next);
    q.set_signaling_values(s2, [next[0], next[1]]);
    let target_p = r + gamma * next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let target_s = r + gamma * next[0].max(next[1]);
    q.set_access_values(s, [target_p, 0.0, 0.0]);
    q.set_signaling_values(s, [target_s, 0.0]);
    let tr = Transition {
        state: s,
        action: ChannelAction::Nothing,
        message: UplinkMessage::Null,
        reward: r,
        next_state: s2,
        terminal: false,
    };
    q_update(&mut q, &tr, alpha, gamma).unwrap();
    prop_assert!((q.access_values(&s)[0] - target_p).abs() <= 1e-12 * (1.0 + target_p.abs()));
    prop_assert!((q.signaling_values(&s)[0] - target_s).abs() <= 1e-12 * (1.0 + target_s.abs()));

    let mut q = QTables::new(0);
    q.set_access_values(s, [start; 3]);
    let tr = Transition {
        terminal: true,
        ..tr
    };
    for k in 1..=50 {
        q_update(&mut q, &tr, alpha, gamma).unwrap();
        let bound = (1.0 - alpha).powi(k) * (start - r).abs() + 1e-9;
        prop_assert!((q.access_values(&s)[0] - r).abs() <= bound);
    }
    Ok(())
}

pub fn memory_fifo(len: usize, pushes: &[MemoryRecord]) -> Result<(), TestCaseError> {
    let mut w = MemoryWindow::new(len);
    let mut all = vec![MemoryRecord::SENTINEL; len];
    for &r in pushes {
        w.push(r);
        all.push(r);
        prop_assert_eq!(w.len(), len);
        let tail: Vec<_> = all[all.len() - len..].to_vec();
        let got: Vec<_> = w.records().copied().collect();
        prop_assert_eq!(got, tail);
    }
    Ok(())
}

pub fn pearson_affine(
    pairs: &[(f64, f64)],
    a: f64,
    b: f64,
    c: f64,
    d: f64,
) -> Result<(), TestCaseError> {
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let Ok(r) = pearson(&x, &y) else {
        return Ok(());
    };
    let x2: Vec<f64> = x.iter().map(|v| a * v + b).collect();
    let y2: Vec<f64> = y.iter().map(|v| c * v + d).collect();
    let r2 = pearson(&x2, &y2).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let sign = (a * c).signum();
    prop_assert!((r2 - sign * r).abs() < 1e-6, "r={} r2={}", r, r2);
    Ok(())
}

/// Upper 1% points of the chi-square distribution, df = 1..=7.
const CHI2_99: [f64; 7] = [6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475];

/// Chi-square statistic of tie-break picks among `ties` maximal entries
/// placed at random positions of an 8-vector; returns (statistic, critical).
pub fn tie_break_chi2(ties: usize, seed: u64, draws: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = [0.0f64; 8];
    for (i, v) in values.iter_mut().enumerate() {
        *v = -((i + 1) as f64);
    }
    let positions: Vec<usize> = (0..ties).map(|k| (k * 3 + 1) % 8).collect();
    for &p in &positions {
        values[p] = 5.0;
    }
    let mut counts = [0usize; 8];
    for _ in 0..draws {
        counts[argmax_random_tie(&values, &mut rng)] += 1;
    }
    let expected = draws as f64 / ties as f64;
    let mut stat = 0.0;
    for (i, &c) in counts.iter().enumerate() {
        if positions.contains(&i) {
            stat += (c as f64 - expected).powi(2) / expected;
        } else {
            assert_eq!(c, 0, "non-maximal entry {i} was chosen");
        }
    }
    (stat, CHI2_99[ties - 2])
}

/// Every key for memory length `len` and observations `0..=max_obs`, decoded
/// back; keys must be pairwise distinct.
pub fn state_keys_exhaustive(len: usize, max_obs: u32) -> usize {
    let mut recs = Vec::new();
    for m in DownlinkMessage::ALL {
        for a in ChannelAction::ALL {
            for n in UplinkMessage::ALL {
                for o in 0..=max_obs {
                    recs.push(MemoryRecord {
                        m: *m,
                        a: *a,
                        n: *n,
                        o: UeObservation(o),
                    });
                }
            }
        }
    }
    let mut windows: Vec<Vec<MemoryRecord>> = vec![vec![]];
    for _ in 0..len {
        windows = windows
            .into_iter()
            .flat_map(|w| {
                recs.iter().map(move |r| {
                    let mut w = w.clone();
                    w.push(*r);
                    w
                })
            })
            .collect();
    }
    let mut seen = std::collections::HashSet::new();
    for w in &windows {
        let win = MemoryWindow::from_records(w.iter().copied());
        for o in 0..=max_obs {
            let k = StateKey::new(UeObservation(o), &win);
            let (o2, w2) = k.decode(len).expect("decodable");
            assert_eq!(o2, UeObservation(o));
            assert_eq!(w2, win);
            assert!(seen.insert(k), "duplicate key {k:?}");
        }
    }
    seen.len()
}
