//! Per-packet trace records, controller-message audit log, and CSV export.

use std::fmt;
use std::fmt::Write as _;

use crate::error::SimError;
use crate::pipeline::{FlowId, FlowKey, Label, NodeId, PacketUid, PortId, StateChangeCause};
use crate::time::{Dur, Time};

/// Why a tracked packet terminated without delivery.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DropReason {
    TableMiss,
    DropAction,
    /// Fast-failover group with no live bucket.
    NoLiveBucket,
    /// Transmitted onto a link that was already down.
    LinkDown,
    /// Was in flight on a link when it failed.
    InFlightOnFailedLink,
    /// Punted with no controller configured.
    NoController,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DropReason::TableMiss => "table_miss",
            DropReason::DropAction => "drop_action",
            DropReason::NoLiveBucket => "no_live_bucket",
            DropReason::LinkDown => "link_down",
            DropReason::InFlightOnFailedLink => "in_flight_on_failed_link",
            DropReason::NoController => "no_controller",
        };
        f.write_str(s)
    }
}

/// Data packets come from generators; probes and copies are spawned by
/// all-group duplication (the first bucket keeps the parent identity).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PacketKind {
    Data,
    Probe,
    Copy,
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PacketKind::Data => "data",
            PacketKind::Probe => "probe",
            PacketKind::Copy => "copy",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PacketStatus {
    InFlight,
    Delivered { at: Time, node: NodeId },
    Dropped { at: Time, node: NodeId, reason: DropReason },
}

/// One visit to a node. `egress` is empty when the packet terminated or
/// was punted there.
#[derive(Clone, Debug)]
pub struct Hop {
    pub node: NodeId,
    pub at: Time,
    pub in_port: Option<PortId>,
    /// State label the packet matched, if the node has a state table.
    pub state: Option<Label>,
    pub egress: Vec<PortId>,
    pub out_at: Time,
    /// Tag on the packet when it left this node.
    pub tag_out: Option<Label>,
    pub punted: bool,
    /// State transitions this traversal caused (on the parent's hop when
    /// the packet was duplicated).
    pub changes: Vec<crate::pipeline::StateChange>,
}

#[derive(Clone, Debug)]
pub struct PacketRecord {
    pub uid: PacketUid,
    pub parent: Option<PacketUid>,
    pub kind: PacketKind,
    pub flow_id: FlowId,
    pub created_at: Time,
    pub hops: Vec<Hop>,
    pub status: PacketStatus,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CtrlDirection {
    ToController,
    ToSwitch,
}

#[derive(Clone, Debug)]
pub struct CtrlRecord {
    pub at: Time,
    pub direction: CtrlDirection,
    pub switch: NodeId,
    pub kind: String,
}

/// One observable state transition, tagged with the switch it happened on.
/// `at` is the logical instant (expiries carry the expiry time); the
/// transition became visible while processing an event at `observed_at`.
#[derive(Clone, Debug)]
pub struct StateLogEntry {
    pub at: Time,
    pub observed_at: Time,
    pub node: NodeId,
    pub key: FlowKey,
    pub old: Label,
    pub new: Label,
    pub cause: StateChangeCause,
}

/// Everything one run produced.
#[derive(Clone, Debug, Default)]
pub struct MetricsLog {
    pub scenario: String,
    pub seed: u64,
    /// Records indexed by packet uid.
    pub packets: Vec<PacketRecord>,
    pub ctrl_msgs: Vec<CtrlRecord>,
    pub state_log: Vec<StateLogEntry>,
    /// (notification sent, flow-mod installed, reroute node) per reactive
    /// recovery action.
    pub recovery_events: Vec<(Time, Time, NodeId)>,
    /// Instants at which primary forwarding was restored (state back to
    /// default at a reroute node, or reactive detour rules removed).
    pub restorations: Vec<(Time, NodeId)>,
    /// The load-balancing switch, when the scenario has one.
    pub lb_switch: Option<NodeId>,
}

impl MetricsLog {
    pub fn generated(&self) -> usize {
        self.packets.iter().filter(|p| p.kind == PacketKind::Data).count()
    }

    pub fn duplicated(&self) -> usize {
        self.packets.iter().filter(|p| p.kind != PacketKind::Data).count()
    }

    pub fn delivered(&self) -> usize {
        self.packets
            .iter()
            .filter(|p| matches!(p.status, PacketStatus::Delivered { .. }))
            .count()
    }

    pub fn dropped(&self) -> usize {
        self.packets
            .iter()
            .filter(|p| matches!(p.status, PacketStatus::Dropped { .. }))
            .count()
    }

    pub fn unterminated(&self) -> usize {
        self.packets
            .iter()
            .filter(|p| p.status == PacketStatus::InFlight)
            .count()
    }

    /// Data packets created inside `[from, to]` that were dropped. Probe
    /// and copy drops are signaling overhead and not counted.
    pub fn count_losses(&self, from: Time, to: Time) -> usize {
        self.packets
            .iter()
            .filter(|p| {
                p.kind == PacketKind::Data
                    && p.created_at >= from
                    && p.created_at <= to
                    && matches!(p.status, PacketStatus::Dropped { .. })
            })
            .count()
    }

    /// Losses per flow id, sorted by flow id.
    pub fn losses_by_flow(&self) -> Vec<(FlowId, usize)> {
        let mut per: std::collections::BTreeMap<FlowId, usize> = std::collections::BTreeMap::new();
        for p in &self.packets {
            if p.kind != PacketKind::Data {
                continue;
            }
            let e = per.entry(p.flow_id).or_insert(0);
            if matches!(p.status, PacketStatus::Dropped { .. }) {
                *e += 1;
            }
        }
        per.into_iter().collect()
    }

    pub fn packets_of_flow(&self, flow: FlowId) -> Vec<&PacketRecord> {
        self.packets.iter().filter(|p| p.flow_id == flow).collect()
    }

    /// Interval between arrival and departure of the flow's first data
    /// packet at the load-balancing switch, controller round trip
    /// included.
    pub fn processing_time(&self, flow: FlowId) -> Result<Dur, SimError> {
        let sw = self
            .lb_switch
            .ok_or_else(|| SimError::Parse("log has no load-balancing switch".into()))?;
        let first = self
            .packets
            .iter()
            .filter(|p| p.flow_id == flow && p.kind == PacketKind::Data)
            .min_by_key(|p| p.created_at)
            .ok_or(SimError::UnknownFlow(flow.0))?;
        let arrival = first
            .hops
            .iter()
            .find(|h| h.node == sw)
            .ok_or(SimError::UnknownFlow(flow.0))?
            .at;
        let departure = first
            .hops
            .iter()
            .filter(|h| h.node == sw && !h.egress.is_empty())
            .map(|h| h.out_at)
            .next_back()
            .ok_or(SimError::UnknownFlow(flow.0))?;
        Ok(departure.since(arrival))
    }

    pub const SUMMARY_CSV_HEADER: &'static str = "scenario,seed,rate,rtt_us,generated,\
         delivered,dropped,losses,recovery_delay_us,restored_at_us";

    /// One summary row for this run, under [`Self::SUMMARY_CSV_HEADER`].
    /// Rate and rtt are run parameters the log itself does not carry.
    pub fn summary_csv_row(&self, rate: u32, rtt: Dur) -> String {
        let recovery = self
            .recovery_events
            .first()
            .map(|(sent, installed, _)| (*installed - *sent).as_us().to_string())
            .unwrap_or_else(|| "0".into());
        let restored = self
            .restorations
            .iter()
            .map(|(t, _)| t.as_us())
            .max()
            .map(|t| t.to_string())
            .unwrap_or_default();
        format!(
            "{},{},{rate},{},{},{},{},{},{recovery},{restored}",
            self.scenario,
            self.seed,
            rtt.as_us(),
            self.generated(),
            self.delivered(),
            self.dropped(),
            self.count_losses(Time::ZERO, Time(u64::MAX)),
        )
    }

    /// One CSV row per packet. Hop lists use `>`-separated segments so the
    /// row stays comma-clean.
    pub fn packets_csv(&self) -> String {
        let mut s = String::from("flow_id,uid,kind,created_at,status,drop_reason,hops\n");
        for p in &self.packets {
            let (status, reason) = match p.status {
                PacketStatus::InFlight => ("in_flight".to_string(), String::new()),
                PacketStatus::Delivered { at, node } => {
                    (format!("delivered@{at}:{node}"), String::new())
                }
                PacketStatus::Dropped { at, node, reason } => {
                    (format!("dropped@{at}:{node}"), reason.to_string())
                }
            };
            let hops = p
                .hops
                .iter()
                .map(|h| format!("{}@{}", h.node, h.at))
                .collect::<Vec<_>>()
                .join(">");
            let _ = writeln!(
                s,
                "{},{},{},{},{status},{reason},{hops}",
                p.flow_id, p.uid.0, p.kind, p.created_at
            );
        }
        s
    }
}
