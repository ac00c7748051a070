//! The three discrete alphabets exchanged between UEs, the channel and the
//! base station, plus the scalar observations.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! alphabet {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident = $idx:literal => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[repr(u8)]
        pub enum $name {
            $(
                #[serde(rename = $label)]
                $variant = $idx,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const COUNT: usize = Self::ALL.len();

            #[inline]
            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::ALL.get(i).copied()
            }

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }
    };
}

alphabet! {
    /// Physical-layer action of a UE on the shared uplink data channel.
    ChannelAction {
        Nothing = 0 => "nothing",
        Transmit = 1 => "transmit",
        Delete = 2 => "delete",
    }
}

alphabet! {
    /// Uplink control message, carried on a dedicated error-free channel.
    UplinkMessage {
        Null = 0 => "null",
        SchedulingRequest = 1 => "sr",
    }
}

alphabet! {
    /// Downlink control message from the base station to one UE.
    DownlinkMessage {
        Null = 0 => "null",
        SchedulingGrant = 1 => "sg",
        Ack = 2 => "ack",
    }
}

/// Number of SDUs still held in a UE's transmit buffer.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct UeObservation(pub u32);

impl UeObservation {
    pub fn remaining(self) -> usize {
        self.0 as usize
    }

    pub fn has_data(self) -> bool {
        self.0 > 0
    }
}

/// What the base station saw on the uplink data channel in one slot.
///
/// Encoded as a single integer in `[0, |U|+1]`: 0 is idle (or an erased
/// lone transmission), `u+1` is a clean reception from UE `u`, and `|U|+1`
/// is a collision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BsObservation(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelEvent {
    Idle,
    Received(usize),
    Collision,
}

impl BsObservation {
    pub const IDLE: BsObservation = BsObservation(0);

    pub fn received(ue: usize) -> Self {
        BsObservation(ue as u32 + 1)
    }

    pub fn collision(num_ues: usize) -> Self {
        BsObservation(num_ues as u32 + 1)
    }

    pub fn event(self, num_ues: usize) -> ChannelEvent {
        match self.0 as usize {
            0 => ChannelEvent::Idle,
            v if v <= num_ues => ChannelEvent::Received(v - 1),
            _ => ChannelEvent::Collision,
        }
    }

    /// UE whose PDU got through in this slot, if any.
    pub fn receiver(self, num_ues: usize) -> Option<usize> {
        match self.event(num_ues) {
            ChannelEvent::Received(u) => Some(u),
            _ => None,
        }
    }
}
