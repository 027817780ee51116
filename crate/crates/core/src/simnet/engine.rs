//! The single-threaded event loop driving switches, links, generators,
//! and the controller channel.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;

use crate::error::{ConfigError, SimError};
use crate::pipeline::{
    Forwarding, HeaderField, Label, NodeId, Packet, PacketUid, PortId, StateChange,
    StateChangeCause, Switch, SwitchConfig,
};
use crate::simnet::controller::{ControllerChannel, ControllerHandler, CtrlCmd};
use crate::simnet::event::{EventKind, NotifyKind, Scheduled};
use crate::simnet::metrics::{
    CtrlDirection, CtrlRecord, DropReason, Hop, MetricsLog, PacketKind, PacketRecord,
    PacketStatus, StateLogEntry,
};
use crate::simnet::topology::{LinkId, NodeKind, Topology};
use crate::simnet::traffic::{grid_instant, TrafficGen, TrafficKind};
use crate::time::{Dur, Time};

/// Everything a run needs. Built from a scenario; consumed by [`Sim`].
pub struct SimSetup {
    pub name: String,
    pub topology: Topology,
    pub configs: BTreeMap<NodeId, SwitchConfig>,
    pub traffic: Vec<TrafficGen>,
    /// Link status schedule: (endpoint a, endpoint b, up, at).
    pub failures: Vec<(NodeId, NodeId, bool, Time)>,
    pub controller: Option<(ControllerChannel, Box<dyn ControllerHandler>)>,
    /// Delay between a link status change and the endpoint switches
    /// observing it.
    pub detection_delay: Dur,
    /// Fixed per-packet pipeline latency of every switch.
    pub switch_latency: Dur,
    /// Drive state timeouts from timer events in addition to lazy,
    /// packet-triggered evaluation. Observable behavior must not change.
    pub eager_timeouts: bool,
    /// Tag labels that mark probe duplicates, for metrics classification.
    pub probe_tags: BTreeSet<Label>,
    pub seed: u64,
    pub lb_switch: Option<NodeId>,
}

fn node_seed(seed: u64, node: NodeId) -> u64 {
    seed ^ (node.0 as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub struct Sim {
    topo: Topology,
    switches: BTreeMap<NodeId, Switch>,
    traffic: Vec<TrafficGen>,
    controller: Option<(ControllerChannel, Box<dyn ControllerHandler>)>,
    detection: Dur,
    latency: Dur,
    eager: bool,
    probe_tags: BTreeSet<Label>,
    gen_rngs: Vec<ChaCha8Rng>,
    queue: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    now: Time,
    link_up: Vec<bool>,
    last_down: Vec<Option<Time>>,
    sweep_at: BTreeMap<NodeId, Time>,
    log: MetricsLog,
}

/// Builds the simulator from a setup and runs it to `until`, inclusive.
pub fn run(setup: SimSetup, until: Time) -> Result<MetricsLog, SimError> {
    let mut sim = Sim::new(setup)?;
    sim.run_until(until)?;
    Ok(sim.into_log())
}

impl Sim {
    pub fn new(mut setup: SimSetup) -> Result<Sim, SimError> {
        let mut switches = BTreeMap::new();
        for (node, kind) in setup.topology.nodes() {
            if kind != NodeKind::Switch {
                continue;
            }
            let ports = setup.topology.ports_of(node);
            let config = setup.configs.remove(&node).unwrap_or_default();
            switches.insert(
                node,
                Switch::from_config(node, ports, node_seed(setup.seed, node), config),
            );
        }
        if let Some(node) = setup.configs.keys().next() {
            return Err(ConfigError::new(format!("config for non-switch node {node}")).into());
        }
        let n_links = setup.topology.links().len();
        let gen_rngs = (0..setup.traffic.len())
            .map(|i| {
                ChaCha8Rng::seed_from_u64(
                    setup.seed ^ (i as u64 + 101).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                )
            })
            .collect();
        let mut sim = Sim {
            topo: setup.topology,
            switches,
            traffic: setup.traffic,
            gen_rngs,
            controller: setup.controller,
            detection: setup.detection_delay,
            latency: setup.switch_latency,
            eager: setup.eager_timeouts,
            probe_tags: setup.probe_tags,
            queue: BinaryHeap::new(),
            seq: 0,
            now: Time::ZERO,
            link_up: vec![true; n_links],
            last_down: vec![None; n_links],
            sweep_at: BTreeMap::new(),
            log: MetricsLog {
                scenario: setup.name,
                seed: setup.seed,
                lb_switch: setup.lb_switch,
                ..MetricsLog::default()
            },
        };
        let failures = std::mem::take(&mut setup.failures);
        for (a, b, up, at) in failures {
            sim.inject_link_status(a, b, up, at)?;
        }
        for gen in 0..sim.traffic.len() {
            sim.schedule_generator_start(gen);
        }
        Ok(sim)
    }

    /// Schedules a link status change. The endpoints observe it after the
    /// detection delay; fast-failover groups re-evaluate on the next
    /// packet.
    pub fn inject_link_status(
        &mut self,
        a: NodeId,
        b: NodeId,
        up: bool,
        at: Time,
    ) -> Result<(), SimError> {
        if at < self.now {
            return Err(ConfigError::new(format!("link event at {at} is in the past")).into());
        }
        let link = self
            .topo
            .link_between(a, b)
            .ok_or(SimError::UnknownLink(a, b))?;
        self.push(at, EventKind::LinkStatus { link, up });
        Ok(())
    }

    fn schedule_generator_start(&mut self, gen: usize) {
        if self.traffic[gen].start >= self.traffic[gen].stop {
            return;
        }
        let kind = match self.traffic[gen].kind {
            TrafficKind::TcpFlowArrivals { .. } => EventKind::GenFlowStart { gen, index: 0 },
            TrafficKind::Cbr { .. } => EventKind::CbrTick { gen, index: 0 },
        };
        if let Some(t) = self.grid_event_time(gen, 0) {
            self.push(t, kind);
        }
    }

    /// Grid instant of a generator event, jittered when configured. The
    /// stop bound applies to the undisturbed grid so the event count does
    /// not depend on jitter draws.
    fn grid_event_time(&mut self, gen: usize, index: u64) -> Option<Time> {
        let g = &self.traffic[gen];
        let rate = g.rate();
        let base = grid_instant(g.start, rate, index);
        if base >= g.stop {
            return None;
        }
        match g.jitter {
            None => Some(base),
            Some(j) => {
                let draw = self.gen_rngs[gen].gen_range(0..=j.as_us());
                // Never schedule into the past: with jitter wider than the
                // grid gap the previous event may already have fired later
                // than this one's draw.
                Some(Time((base.as_us() + draw).max(self.now.as_us())))
            }
        }
    }

    fn push(&mut self, time: Time, kind: EventKind) {
        let seq = self.seq;
        self.seq += 1;
        self.queue.push(Reverse(Scheduled { time, seq, kind }));
    }

    pub fn run_until(&mut self, until: Time) -> Result<(), SimError> {
        while let Some(Reverse(ev)) = self.queue.peek() {
            if ev.time > until {
                break;
            }
            let Reverse(ev) = self.queue.pop().expect("peeked");
            self.now = ev.time;
            self.dispatch(ev.kind)?;
        }
        Ok(())
    }

    pub fn into_log(self) -> MetricsLog {
        self.log
    }

    fn dispatch(&mut self, kind: EventKind) -> Result<(), SimError> {
        match kind {
            EventKind::Arrival {
                node,
                port,
                packet,
                sent_at,
                via,
            } => self.on_arrival(node, port, packet, sent_at, via),
            EventKind::LinkStatus { link, up } => {
                self.on_link_status(link, up);
                Ok(())
            }
            EventKind::PortObserved { node, port, up } => {
                self.observe_port(node, port, up);
                Ok(())
            }
            EventKind::CtrlArrive {
                switch,
                msg,
                sent_at,
            } => {
                self.on_ctrl_arrive(switch, msg, sent_at);
                Ok(())
            }
            EventKind::CtrlDeliver {
                cmd,
                sent_at,
                recovery,
                restore,
            } => self.on_ctrl_deliver(cmd, sent_at, recovery, restore),
            EventKind::GenFlowStart { gen, index } => self.on_flow_start(gen, index),
            EventKind::GenPacket { gen, index, pkt } => self.on_flow_packet(gen, index, pkt),
            EventKind::CbrTick { gen, index } => self.on_cbr_tick(gen, index),
            EventKind::TimerSweep { node } => {
                self.on_timer_sweep(node);
                Ok(())
            }
        }
    }

    // ----- traffic ------------------------------------------------------

    fn flow_base(gen: usize) -> u64 {
        (gen as u64 + 1) * 1_000_000
    }

    fn on_flow_start(&mut self, gen: usize, index: u64) -> Result<(), SimError> {
        let (flows, pkts_per_flow, pkt_gap) = match self.traffic[gen].kind {
            TrafficKind::TcpFlowArrivals {
                flows,
                pkts_per_flow,
                pkt_gap,
                ..
            } => (flows, pkts_per_flow, pkt_gap),
            _ => unreachable!("flow start on non-flow generator"),
        };
        if let Some(limit) = flows {
            if index >= limit {
                return Ok(());
            }
        }
        self.emit_packet(gen, Self::flow_base(gen) + index, Some(1024 + index))?;
        if pkts_per_flow > 1 {
            let t = self.now + pkt_gap;
            self.push(t, EventKind::GenPacket { gen, index, pkt: 1 });
        }
        let next_idx = index + 1;
        let within_count = flows.is_none_or(|limit| next_idx < limit);
        if within_count {
            if let Some(t) = self.grid_event_time(gen, next_idx) {
                self.push(t, EventKind::GenFlowStart { gen, index: next_idx });
            }
        }
        Ok(())
    }

    fn on_flow_packet(&mut self, gen: usize, index: u64, pkt: u32) -> Result<(), SimError> {
        let (pkts_per_flow, pkt_gap) = match self.traffic[gen].kind {
            TrafficKind::TcpFlowArrivals {
                pkts_per_flow,
                pkt_gap,
                ..
            } => (pkts_per_flow, pkt_gap),
            _ => unreachable!("flow packet on non-flow generator"),
        };
        self.emit_packet(gen, Self::flow_base(gen) + index, Some(1024 + index))?;
        if pkt + 1 < pkts_per_flow {
            let t = self.now + pkt_gap;
            self.push(t, EventKind::GenPacket { gen, index, pkt: pkt + 1 });
        }
        Ok(())
    }

    fn on_cbr_tick(&mut self, gen: usize, index: u64) -> Result<(), SimError> {
        debug_assert!(matches!(self.traffic[gen].kind, TrafficKind::Cbr { .. }));
        self.emit_packet(gen, Self::flow_base(gen), None)?;
        if let Some(t) = self.grid_event_time(gen, index + 1) {
            self.push(t, EventKind::CbrTick { gen, index: index + 1 });
        }
        Ok(())
    }

    /// Creates a tracked data packet at the generator's source host and
    /// transmits it on the host uplink.
    fn emit_packet(
        &mut self,
        gen: usize,
        flow_id: u64,
        l4_src: Option<u64>,
    ) -> Result<(), SimError> {
        let g = &self.traffic[gen];
        let mut packet = Packet::new();
        for (&field, &value) in &g.headers {
            packet.set(field, value);
        }
        if let Some(p) = l4_src {
            packet.set(HeaderField::L4Src, p);
        }
        packet.created_at = self.now;
        packet.flow_id = crate::pipeline::FlowId(flow_id);
        let src = g.src;
        let uid = self.new_record(None, PacketKind::Data, packet.flow_id, self.now);
        packet.uid = uid;
        let link = self.topo.host_uplink(src)?;
        self.transmit_on(link, src, packet, self.now);
        Ok(())
    }

    fn new_record(
        &mut self,
        parent: Option<PacketUid>,
        kind: PacketKind,
        flow_id: crate::pipeline::FlowId,
        created_at: Time,
    ) -> PacketUid {
        let uid = PacketUid(self.log.packets.len() as u64);
        self.log.packets.push(PacketRecord {
            uid,
            parent,
            kind,
            flow_id,
            created_at,
            hops: Vec::new(),
            status: PacketStatus::InFlight,
        });
        uid
    }

    // ----- links --------------------------------------------------------

    fn on_link_status(&mut self, link: LinkId, up: bool) {
        if self.link_up[link.0] == up {
            return; // idempotent
        }
        self.link_up[link.0] = up;
        if !up {
            self.last_down[link.0] = Some(self.now);
        }
        let l = self.topo.link(link);
        let endpoints = [l.a, l.b];
        if self.detection == Dur::ZERO {
            for (node, port) in endpoints {
                self.observe_port(node, port, up);
            }
        } else {
            let at = self.now + self.detection;
            for (node, port) in endpoints {
                self.push(at, EventKind::PortObserved { node, port, up });
            }
        }
    }

    fn observe_port(&mut self, node: NodeId, port: PortId, up: bool) {
        let Some(sw) = self.switches.get_mut(&node) else {
            return; // host endpoints have no port state
        };
        sw.set_port(port, up);
        if let Some((channel, _)) = &self.controller {
            let owd = channel.one_way;
            self.log.ctrl_msgs.push(CtrlRecord {
                at: self.now,
                direction: CtrlDirection::ToController,
                switch: node,
                kind: format!("port_status:{port}:{}", if up { "up" } else { "down" }),
            });
            let sent_at = self.now;
            self.push(
                self.now + owd,
                EventKind::CtrlArrive {
                    switch: node,
                    msg: NotifyKind::PortStatus { port, up },
                    sent_at,
                },
            );
        }
    }

    /// Sends a packet out of (node, port) at `at`. Transmitting onto a
    /// down link loses the packet.
    fn transmit(&mut self, node: NodeId, port: PortId, packet: Packet, at: Time) -> Result<(), SimError> {
        let Some(link) = self.topo.link_at(node, port) else {
            return Err(ConfigError::new(format!(
                "node {node} emitted on unlinked port {port}"
            ))
            .into());
        };
        if !self.link_up[link.0] {
            self.drop_packet(packet.uid, at, node, DropReason::LinkDown);
            return Ok(());
        }
        let l = self.topo.link(link);
        let (far_node, far_port) = l.opposite(node);
        let arrive = at + l.delay;
        self.push(
            arrive,
            EventKind::Arrival {
                node: far_node,
                port: far_port,
                packet,
                sent_at: at,
                via: link,
            },
        );
        Ok(())
    }

    /// Transmit variant used at hosts, where the uplink is known.
    fn transmit_on(&mut self, link: LinkId, from: NodeId, packet: Packet, at: Time) {
        if !self.link_up[link.0] {
            self.drop_packet(packet.uid, at, from, DropReason::LinkDown);
            return;
        }
        let l = self.topo.link(link);
        let (far_node, far_port) = l.opposite(from);
        let arrive = at + l.delay;
        self.push(
            arrive,
            EventKind::Arrival {
                node: far_node,
                port: far_port,
                packet,
                sent_at: at,
                via: link,
            },
        );
    }

    fn drop_packet(&mut self, uid: PacketUid, at: Time, node: NodeId, reason: DropReason) {
        let rec = &mut self.log.packets[uid.0 as usize];
        rec.status = PacketStatus::Dropped { at, node, reason };
    }

    // ----- packet handling ----------------------------------------------

    fn on_arrival(
        &mut self,
        node: NodeId,
        port: PortId,
        packet: Packet,
        sent_at: Time,
        via: LinkId,
    ) -> Result<(), SimError> {
        // A failure after the packet left the near end means it was in
        // flight on the link when the link went down.
        if let Some(down_at) = self.last_down[via.0] {
            if down_at >= sent_at {
                self.drop_packet(packet.uid, self.now, node, DropReason::InFlightOnFailedLink);
                return Ok(());
            }
        }
        match self.topo.node_kind(node) {
            Some(NodeKind::Host) => {
                let uid = packet.uid;
                let tag = packet.tag();
                let rec = &mut self.log.packets[uid.0 as usize];
                rec.hops.push(Hop {
                    node,
                    at: self.now,
                    in_port: Some(port),
                    state: None,
                    egress: Vec::new(),
                    out_at: self.now,
                    tag_out: tag,
                    punted: false,
                    changes: Vec::new(),
                });
                rec.status = PacketStatus::Delivered { at: self.now, node };
                Ok(())
            }
            Some(NodeKind::Switch) => self.switch_ingest(node, port, packet),
            None => Err(ConfigError::new(format!("arrival at unknown node {node}")).into()),
        }
    }

    fn switch_ingest(&mut self, node: NodeId, port: PortId, mut packet: Packet) -> Result<(), SimError> {
        packet.ingress_port = port;
        let uid = packet.uid;
        let flow_id = packet.flow_id;
        let sw = self.switches.get_mut(&node).expect("switch exists");
        let fwd = sw
            .process_packet(packet, self.now)
            .map_err(|source| SimError::Pipeline { node, source })?;
        let out_at = self.now + self.latency;

        self.record_state_changes(node, &fwd.state_changes);

        let matched_state = fwd.matched_state;
        let state_changes = fwd.state_changes.clone();
        let Forwarding {
            emissions, punts, dropped, ..
        } = fwd;

        let mut handled_parent = false;
        for (eport, mut epkt) in emissions {
            if !handled_parent {
                handled_parent = true;
                self.log.packets[uid.0 as usize].hops.push(Hop {
                    node,
                    at: self.now,
                    in_port: Some(port),
                    state: matched_state,
                    egress: vec![eport],
                    out_at,
                    tag_out: epkt.tag(),
                    punted: false,
                    changes: state_changes.clone(),
                });
                self.transmit(node, eport, epkt, out_at)?;
            } else {
                // All-group duplicate: spawn a tracked child packet.
                let kind = match epkt.tag() {
                    Some(t) if self.probe_tags.contains(&t) => PacketKind::Probe,
                    _ => PacketKind::Copy,
                };
                let child = self.new_record(Some(uid), kind, flow_id, out_at);
                epkt.uid = child;
                self.log.packets[child.0 as usize].hops.push(Hop {
                    node,
                    at: self.now,
                    in_port: Some(port),
                    state: None,
                    egress: vec![eport],
                    out_at,
                    tag_out: epkt.tag(),
                    punted: false,
                    changes: Vec::new(),
                });
                self.transmit(node, eport, epkt, out_at)?;
            }
        }

        let mut punted = false;
        for punt in punts {
            match &self.controller {
                Some((channel, _)) => {
                    punted = true;
                    let owd = channel.one_way;
                    self.log.ctrl_msgs.push(CtrlRecord {
                        at: self.now,
                        direction: CtrlDirection::ToController,
                        switch: node,
                        kind: "packet_in".into(),
                    });
                    let sent_at = self.now;
                    self.push(
                        self.now + owd,
                        EventKind::CtrlArrive {
                            switch: node,
                            msg: NotifyKind::PacketIn(punt),
                            sent_at,
                        },
                    );
                }
                None => {
                    self.drop_packet(uid, self.now, node, DropReason::NoController);
                }
            }
        }

        if !handled_parent {
            // No emission kept the parent identity: record the visit and
            // settle the packet's fate.
            self.log.packets[uid.0 as usize].hops.push(Hop {
                node,
                at: self.now,
                in_port: Some(port),
                state: matched_state,
                egress: Vec::new(),
                out_at,
                tag_out: None,
                punted,
                changes: state_changes.clone(),
            });
            if !punted {
                let reason = match dropped {
                    Some(cause) => match cause {
                        crate::pipeline::DropCause::TableMiss => DropReason::TableMiss,
                        crate::pipeline::DropCause::DropAction => DropReason::DropAction,
                        crate::pipeline::DropCause::NoLiveBucket => DropReason::NoLiveBucket,
                    },
                    None => DropReason::DropAction,
                };
                match self.log.packets[uid.0 as usize].status {
                    PacketStatus::Dropped { .. } => {}
                    _ => self.drop_packet(uid, self.now, node, reason),
                }
            }
        }

        if self.eager {
            self.reschedule_sweep(node);
        }
        Ok(())
    }

    fn record_state_changes(&mut self, node: NodeId, changes: &[StateChange]) {
        for c in changes {
            if c.new == 0 && c.cause == StateChangeCause::Set {
                self.log.restorations.push((c.at, node));
            }
            self.log.state_log.push(StateLogEntry {
                at: c.at,
                observed_at: self.now,
                node,
                key: c.key.clone(),
                old: c.old,
                new: c.new,
                cause: c.cause,
            });
        }
    }

    // ----- controller ---------------------------------------------------

    fn on_ctrl_arrive(&mut self, switch: NodeId, msg: NotifyKind, sent_at: Time) {
        let Some((channel, handler)) = self.controller.as_mut() else {
            return;
        };
        let proc = channel.proc;
        let owd = channel.one_way;
        let (cmds, recovery, restore) = match msg {
            NotifyKind::PacketIn(packet) => {
                (handler.on_packet_in(switch, &packet, self.now), false, false)
            }
            NotifyKind::PortStatus { port, up } => (
                handler.on_port_status(switch, port, up, self.now),
                !up,
                up,
            ),
        };
        let deliver_at = self.now + proc + owd;
        let is_recovery = recovery && cmds.iter().any(|c| matches!(c, CtrlCmd::InstallFlow { .. }));
        let is_restore = restore && cmds.iter().any(|c| matches!(c, CtrlCmd::RemoveFlow { .. }));
        if is_recovery {
            // Recovery delay: notification send to flow-table update.
            let target = cmds
                .iter()
                .find_map(|c| match c {
                    CtrlCmd::InstallFlow { switch, .. } => Some(*switch),
                    _ => None,
                })
                .expect("checked above");
            self.log.recovery_events.push((sent_at, deliver_at, target));
        }
        if is_restore {
            let target = cmds
                .iter()
                .find_map(|c| match c {
                    CtrlCmd::RemoveFlow { switch, .. } => Some(*switch),
                    _ => None,
                })
                .expect("checked above");
            self.log.restorations.push((deliver_at, target));
        }
        for cmd in cmds {
            self.push(
                deliver_at,
                EventKind::CtrlDeliver {
                    cmd,
                    sent_at,
                    recovery: is_recovery,
                    restore: is_restore,
                },
            );
        }
    }

    fn on_ctrl_deliver(
        &mut self,
        cmd: CtrlCmd,
        _sent_at: Time,
        _recovery: bool,
        _restore: bool,
    ) -> Result<(), SimError> {
        match cmd {
            CtrlCmd::InstallFlow { switch, entry } => {
                self.log.ctrl_msgs.push(CtrlRecord {
                    at: self.now,
                    direction: CtrlDirection::ToSwitch,
                    switch,
                    kind: "flow_mod_add".into(),
                });
                if let Some(sw) = self.switches.get_mut(&switch) {
                    sw.install_flow(entry);
                }
            }
            CtrlCmd::RemoveFlow {
                switch,
                priority,
                conditions,
            } => {
                self.log.ctrl_msgs.push(CtrlRecord {
                    at: self.now,
                    direction: CtrlDirection::ToSwitch,
                    switch,
                    kind: "flow_mod_del".into(),
                });
                if let Some(sw) = self.switches.get_mut(&switch) {
                    sw.remove_flows(priority, &conditions);
                }
            }
            CtrlCmd::PacketOut {
                switch,
                port,
                packet,
            } => {
                self.log.ctrl_msgs.push(CtrlRecord {
                    at: self.now,
                    direction: CtrlDirection::ToSwitch,
                    switch,
                    kind: "packet_out".into(),
                });
                let out_at = self.now + self.latency;
                let uid = packet.uid;
                let tag = packet.tag();
                self.log.packets[uid.0 as usize].hops.push(Hop {
                    node: switch,
                    at: self.now,
                    in_port: None,
                    state: None,
                    egress: vec![port],
                    out_at,
                    tag_out: tag,
                    punted: false,
                    changes: Vec::new(),
                });
                self.transmit(switch, port, packet, out_at)?;
            }
        }
        Ok(())
    }

    // ----- eager timers ---------------------------------------------------

    fn on_timer_sweep(&mut self, node: NodeId) {
        self.sweep_at.remove(&node);
        let mut changes = Vec::new();
        if let Some(sw) = self.switches.get_mut(&node) {
            if let Some(table) = sw.state_table_mut() {
                table.sweep(self.now, &mut changes);
            }
        }
        self.record_state_changes(node, &changes);
        self.reschedule_sweep(node);
    }

    fn reschedule_sweep(&mut self, node: NodeId) {
        let next = self
            .switches
            .get(&node)
            .and_then(|sw| sw.state_table())
            .and_then(|t| t.next_expiry());
        let Some(next) = next else {
            return;
        };
        match self.sweep_at.get(&node) {
            Some(&pending) if pending >= self.now && pending <= next => {}
            _ => {
                self.push(next, EventKind::TimerSweep { node });
                self.sweep_at.insert(node, next);
            }
        }
    }
}
