//! The latency-modeled controller channel.
//!
//! The controller is a logical node reached over a symmetric one-way
//! delay; its handler adds a processing delay before commands leave. The
//! handler implementations live in `baseline`.

use crate::pipeline::{Condition, FlowEntry, NodeId, Packet, PortId};
use crate::time::{Dur, Time};

/// Channel latency parameters: every switch-to-controller and
/// controller-to-switch message costs `one_way`; the handler adds `proc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ControllerChannel {
    pub one_way: Dur,
    pub proc: Dur,
}

impl ControllerChannel {
    pub fn from_rtt(rtt: Dur, proc: Dur) -> ControllerChannel {
        ControllerChannel {
            one_way: Dur(rtt.0 / 2),
            proc,
        }
    }

    pub fn rtt(&self) -> Dur {
        Dur(self.one_way.0 * 2)
    }
}

/// Commands a handler can send back down to switches.
#[derive(Clone, Debug)]
pub enum CtrlCmd {
    InstallFlow {
        switch: NodeId,
        entry: FlowEntry,
    },
    RemoveFlow {
        switch: NodeId,
        priority: u32,
        conditions: Vec<Condition>,
    },
    /// Forward a held packet out of a switch port.
    PacketOut {
        switch: NodeId,
        port: PortId,
        packet: Packet,
    },
}

/// Reactive application hooks invoked by the simulator's event loop.
pub trait ControllerHandler {
    fn on_packet_in(&mut self, switch: NodeId, packet: &Packet, now: Time) -> Vec<CtrlCmd>;

    fn on_port_status(&mut self, switch: NodeId, port: PortId, up: bool, now: Time)
        -> Vec<CtrlCmd>;
}
