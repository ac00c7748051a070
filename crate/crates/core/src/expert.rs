//! Hand-written UE policies: the fully coordinated expert, and the two
//! single-SDU policies whose expected returns have closed forms.

use crate::types::{ChannelAction, DownlinkMessage, UeObservation, UplinkMessage};

/// What the expert remembers between slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpertUeState {
    pub last_dl: DownlinkMessage,
    pub last_action: ChannelAction,
}

impl Default for ExpertUeState {
    fn default() -> Self {
        ExpertUeState {
            last_dl: DownlinkMessage::Null,
            last_action: ChannelAction::Nothing,
        }
    }
}

/// Transmit on a fresh grant, delete on an ACK, otherwise stay quiet.
pub fn expert_channel_access(
    o: UeObservation,
    m_prev: DownlinkMessage,
    a_prev: ChannelAction,
) -> ChannelAction {
    if m_prev == DownlinkMessage::SchedulingGrant
        && o.has_data()
        && a_prev != ChannelAction::Transmit
    {
        ChannelAction::Transmit
    } else if m_prev == DownlinkMessage::Ack && o.has_data() {
        ChannelAction::Delete
    } else {
        ChannelAction::Nothing
    }
}

/// Request a grant when holding data and not already granted; after an ACK,
/// only if more than the acknowledged SDU remains.
pub fn expert_signaling(o: UeObservation, m_prev: DownlinkMessage) -> UplinkMessage {
    let wants = o.has_data()
        && (m_prev == DownlinkMessage::Null || (o.0 > 1 && m_prev == DownlinkMessage::Ack));
    if wants {
        UplinkMessage::SchedulingRequest
    } else {
        UplinkMessage::Null
    }
}

/// Fire-and-forget: transmit whenever holding data, delete right after.
/// Ignores all downlink signaling.
pub fn fire_and_delete(o: UeObservation, a_prev: ChannelAction) -> ChannelAction {
    match (o.has_data(), a_prev) {
        (false, _) => ChannelAction::Nothing,
        (true, ChannelAction::Transmit) => ChannelAction::Delete,
        (true, _) => ChannelAction::Transmit,
    }
}

/// Keep transmitting until an ACK arrives, then delete. Meant for a single
/// SDU: with several SDUs a late duplicate ACK would delete the next one.
pub fn transmit_until_ack(o: UeObservation, m_prev: DownlinkMessage) -> ChannelAction {
    match (o.has_data(), m_prev) {
        (false, _) => ChannelAction::Nothing,
        (true, DownlinkMessage::Ack) => ChannelAction::Delete,
        (true, _) => ChannelAction::Transmit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ChannelAction::*;
    use DownlinkMessage::{Ack, Null, SchedulingGrant as SG};

    #[test]
    fn channel_access_cases() {
        assert_eq!(
            expert_channel_access(UeObservation(1), SG, Nothing),
            Transmit
        );
        assert_eq!(
            expert_channel_access(UeObservation(1), Ack, Transmit),
            Delete
        );
        assert_eq!(
            expert_channel_access(UeObservation(0), SG, Nothing),
            Nothing
        );
        assert_eq!(
            expert_channel_access(UeObservation(1), SG, Transmit),
            Nothing
        );
        assert_eq!(
            expert_channel_access(UeObservation(2), Null, Nothing),
            Nothing
        );
    }

    #[test]
    fn signaling_cases() {
        let sr = UplinkMessage::SchedulingRequest;
        assert_eq!(expert_signaling(UeObservation(2), Ack), sr);
        assert_eq!(expert_signaling(UeObservation(1), Ack), UplinkMessage::Null);
        assert_eq!(
            expert_signaling(UeObservation(0), Null),
            UplinkMessage::Null
        );
        assert_eq!(expert_signaling(UeObservation(1), Null), sr);
        assert_eq!(expert_signaling(UeObservation(3), SG), UplinkMessage::Null);
    }

    #[test]
    fn naive_policies() {
        assert_eq!(fire_and_delete(UeObservation(1), Nothing), Transmit);
        assert_eq!(fire_and_delete(UeObservation(1), Transmit), Delete);
        assert_eq!(fire_and_delete(UeObservation(0), Transmit), Nothing);
        assert_eq!(transmit_until_ack(UeObservation(1), Null), Transmit);
        assert_eq!(transmit_until_ack(UeObservation(1), SG), Transmit);
        assert_eq!(transmit_until_ack(UeObservation(1), Ack), Delete);
        assert_eq!(transmit_until_ack(UeObservation(0), Ack), Nothing);
    }
}
