//! Closed-form single-UE optima, episode returns, Instantaneous Coordination
//! and the Pearson correlation between coordination and performance.

use crate::error::{Error, Result};
use crate::trainer::EpisodeTrace;
use crate::types::{ChannelAction, DownlinkMessage};

/// Expected return of fire-and-delete with one UE and one SDU.
pub fn expected_r1(bler: f64, t_max: usize) -> f64 {
    bler * (2.0 - t_max as f64) - 2.0
}

/// Expected return of transmit-until-ACK with one UE and one SDU.
pub fn expected_r2(bler: f64, t_max: usize) -> f64 {
    let t = t_max as f64;
    match t_max {
        0..=3 => -t,
        4 => -(bler + 3.0),
        _ if bler == 0.0 => -3.0,
        _ => {
            let mut acc = 3.0;
            let mut pow = bler; // b^(i-3)
            for i in 4..t_max {
                acc += i as f64 * pow;
                pow *= bler;
            }
            // pow == b^(t_max-3) here
            (bler - 1.0) * acc - t * pow
        }
    }
}

/// Best of the two single-UE policies.
pub fn optimal_r(bler: f64, t_max: usize) -> f64 {
    expected_r1(bler, t_max).max(expected_r2(bler, t_max))
}

pub fn episode_return(trace: &EpisodeTrace) -> f64 {
    trace.steps.iter().map(|s| s.reward).sum()
}

/// Joint counts of `(m_t, a_{t+1})` for one UE, rows indexed by DL message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CoordinationCounts {
    pub joint: [[u64; ChannelAction::COUNT]; DownlinkMessage::COUNT],
}

impl CoordinationCounts {
    pub fn add(&mut self, m: DownlinkMessage, next_a: ChannelAction) {
        self.joint[m.index()][next_a.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.joint.iter().flatten().sum()
    }

    /// Pools consecutive pairs within every episode.
    pub fn from_traces(traces: &[EpisodeTrace], ue: usize) -> Self {
        let mut c = CoordinationCounts::default();
        for tr in traces {
            for w in tr.steps.windows(2) {
                if let (Some(now), Some(next)) = (w[0].ues.get(ue), w[1].ues.get(ue)) {
                    c.add(now.m, next.a);
                }
            }
        }
        c
    }

    /// Plug-in mutual information in nats, with `0 log 0 = 0`.
    pub fn mutual_information(&self) -> f64 {
        let total = self.total() as f64;
        if total == 0.0 {
            return 0.0;
        }
        let mut pm = [0.0; DownlinkMessage::COUNT];
        let mut pa = [0.0; ChannelAction::COUNT];
        for (i, row) in self.joint.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let p = c as f64 / total;
                pm[i] += p;
                pa[j] += p;
            }
        }
        let mut mi = 0.0;
        for (i, row) in self.joint.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let p = c as f64 / total;
                    mi += p * (p / (pm[i] * pa[j])).ln();
                }
            }
        }
        mi.max(0.0)
    }
}

/// `I(m_t; a_{t+1})` for UE `ue`, pooled over all steps of all traces.
pub fn instantaneous_coordination(traces: &[EpisodeTrace], ue: usize) -> Result<f64> {
    let counts = CoordinationCounts::from_traces(traces, ue);
    if counts.total() == 0 {
        return Err(Error::EmptyTraces(ue));
    }
    Ok(counts.mutual_information())
}

/// IC averaged over all UEs present in the traces.
pub fn mean_instantaneous_coordination(traces: &[EpisodeTrace]) -> Result<f64> {
    let n = traces
        .first()
        .map(|t| t.num_ues)
        .ok_or(Error::EmptyTraces(0))?;
    let mut sum = 0.0;
    for u in 0..n {
        sum += instantaneous_coordination(traces, u)?;
    }
    Ok(sum / n as f64)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Pearson("samples differ in length"));
    }
    if x.len() < 2 {
        return Err(Error::Pearson("need at least two samples"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Pearson("zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
