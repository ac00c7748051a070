//! Non-learning base-station MAC: random scheduling among requesters, with
//! an ACK replacing the grant for the UE whose PDU was just received.

use crate::types::{BsObservation, DownlinkMessage, UplinkMessage};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BsDecision {
    pub dl_messages: Vec<DownlinkMessage>,
}

impl BsDecision {
    pub fn granted(&self) -> Option<usize> {
        self.dl_messages
            .iter()
            .position(|&m| m == DownlinkMessage::SchedulingGrant)
    }

    pub fn acked(&self) -> Option<usize> {
        self.dl_messages
            .iter()
            .position(|&m| m == DownlinkMessage::Ack)
    }
}

/// One downlink message per UE for this slot.
///
/// `bs_obs` is the channel observation the BS acts on; `ul_messages[u]` is
/// the request from UE `u`. The acknowledged UE is never granted in the same
/// slot, and at most one grant is issued. The RNG is only consulted when two
/// or more candidates compete for the grant.
pub fn bs_policy<R: Rng + ?Sized>(
    bs_obs: BsObservation,
    ul_messages: &[UplinkMessage],
    rng: &mut R,
) -> BsDecision {
    let n = ul_messages.len();
    let mut dl = vec![DownlinkMessage::Null; n];
    let acked = bs_obs.receiver(n);
    if let Some(r) = acked {
        dl[r] = DownlinkMessage::Ack;
    }

    let candidates: Vec<usize> = ul_messages
        .iter()
        .enumerate()
        .filter(|&(u, &m)| m == UplinkMessage::SchedulingRequest && Some(u) != acked)
        .map(|(u, _)| u)
        .collect();
    let chosen = match candidates.len() {
        0 => None,
        1 => Some(candidates[0]),
        k => Some(candidates[rng.gen_range(0..k)]),
    };
    if let Some(u) = chosen {
        dl[u] = DownlinkMessage::SchedulingGrant;
    }
    BsDecision { dl_messages: dl }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DownlinkMessage::{Ack, Null as DNull, SchedulingGrant as SG};
    use crate::types::UplinkMessage::{Null, SchedulingRequest as SR};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    #[test]
    fn lone_requester_gets_grant() {
        let d = bs_policy(BsObservation(0), &[SR, Null], &mut rng());
        assert_eq!(d.dl_messages, vec![SG, DNull]);
    }

    #[test]
    fn ack_replaces_grant() {
        let d = bs_policy(BsObservation(1), &[SR, Null], &mut rng());
        assert_eq!(d.dl_messages, vec![Ack, DNull]);
    }

    #[test]
    fn other_requester_is_scheduled_after_ack() {
        let d = bs_policy(BsObservation(1), &[SR, SR], &mut rng());
        assert_eq!(d.dl_messages, vec![Ack, SG]);
    }

    #[test]
    fn ack_without_request() {
        let d = bs_policy(BsObservation(2), &[Null, Null], &mut rng());
        assert_eq!(d.dl_messages, vec![DNull, Ack]);
    }

    #[test]
    fn collision_is_not_acked() {
        let d = bs_policy(BsObservation(3), &[Null, Null], &mut rng());
        assert_eq!(d.dl_messages, vec![DNull, DNull]);
    }

    #[test]
    fn symmetric_requesters_are_granted_fairly() {
        let trials = 20_000;
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let mut first = 0usize;
        for _ in 0..trials {
            let d = bs_policy(BsObservation(0), &[SR, SR], &mut r);
            assert!(d.acked().is_none());
            if d.granted() == Some(0) {
                first += 1;
            }
        }
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((first as f64 - trials as f64 / 2.0).abs() < 3.0 * sd);
    }
}
