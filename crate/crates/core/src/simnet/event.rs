//! Time-ordered deterministic event queue. Events with equal time execute
//! in schedule order (a monotonically increasing sequence number), so a
//! whole run is a pure function of (setup, seed).

use std::cmp::Ordering;

use crate::pipeline::{NodeId, Packet, PortId};
use crate::simnet::controller::CtrlCmd;
use crate::simnet::topology::LinkId;
use crate::time::Time;

#[derive(Debug)]
pub enum NotifyKind {
    PacketIn(Packet),
    PortStatus { port: PortId, up: bool },
}

#[derive(Debug)]
pub enum EventKind {
    /// A packet reaches the far end of a link.
    Arrival {
        node: NodeId,
        port: PortId,
        packet: Packet,
        sent_at: Time,
        via: LinkId,
    },
    LinkStatus {
        link: LinkId,
        up: bool,
    },
    /// An endpoint switch notices a port change (after detection delay).
    PortObserved {
        node: NodeId,
        port: PortId,
        up: bool,
    },
    /// Switch-to-controller message lands at the controller.
    CtrlArrive {
        switch: NodeId,
        msg: NotifyKind,
        sent_at: Time,
    },
    /// Controller command lands at a switch.
    CtrlDeliver {
        cmd: CtrlCmd,
        sent_at: Time,
        /// Set for commands that answer a port-down (recovery) or
        /// port-up (restore) notification.
        recovery: bool,
        restore: bool,
    },
    /// Start of flow number `index` of a tcp-flow generator.
    GenFlowStart {
        gen: usize,
        index: u64,
    },
    /// Packet `pkt` of flow `index` of a tcp-flow generator.
    GenPacket {
        gen: usize,
        index: u64,
        pkt: u32,
    },
    /// Emission `index` of a cbr generator.
    CbrTick {
        gen: usize,
        index: u64,
    },
    /// Eager state-timeout sweep on one switch.
    TimerSweep {
        node: NodeId,
    },
}

#[derive(Debug)]
pub struct Scheduled {
    pub time: Time,
    pub seq: u64,
    pub kind: EventKind,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}
