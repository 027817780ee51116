//! Traffic generators.
//!
//! Arrivals are evenly spaced on an exact integer grid: the i-th event of
//! a generator with rate `r` per second fires at
//! `start + floor(i * 1_000_000 / r)` microseconds. The grid is part of
//! the generator contract — loss oracles enumerate it directly.

use std::collections::BTreeMap;

use crate::pipeline::{FieldValue, HeaderField, NodeId};
use crate::time::Time;

/// Absolute instant of the i-th grid event.
pub fn grid_instant(start: Time, rate: u32, index: u64) -> Time {
    Time(start.0 + index * 1_000_000 / rate as u64)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TrafficKind {
    /// Poisson-free stream of short keyed packet trains, one per "TCP
    /// flow"; each flow gets a fresh l4 source port.
    TcpFlowArrivals {
        /// New flows per second.
        rate: u32,
        /// Total flows to generate (None = until the stop time).
        flows: Option<u64>,
        pkts_per_flow: u32,
        pkt_gap: crate::time::Dur,
    },
    /// Constant bit rate stream under a single flow id.
    Cbr { rate: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrafficGen {
    pub kind: TrafficKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub start: Time,
    pub stop: Time,
    /// Optional seedable jitter: each grid event is delayed by a uniform
    /// draw from [0, jitter]. Off by default so loss oracles stay exact.
    pub jitter: Option<crate::time::Dur>,
    /// Header template applied to every generated packet; per-flow fields
    /// (l4_src) are filled in on top.
    pub headers: BTreeMap<HeaderField, FieldValue>,
}

impl TrafficGen {
    pub fn rate(&self) -> u32 {
        match self.kind {
            TrafficKind::TcpFlowArrivals { rate, .. } => rate,
            TrafficKind::Cbr { rate } => rate,
        }
    }

    pub fn set_rate(&mut self, new_rate: u32) {
        match &mut self.kind {
            TrafficKind::TcpFlowArrivals { rate, .. } => *rate = new_rate,
            TrafficKind::Cbr { rate } => *rate = new_rate,
        }
    }
}
