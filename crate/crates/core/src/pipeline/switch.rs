//! The stateful switch: an optional state table in front of a flow table,
//! plus group tables and port status.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::PipelineError;
use crate::pipeline::flow::{Action, Condition, FlowEntry};
use crate::pipeline::group::{stable_hash, GroupEntry, GroupKind};
use crate::pipeline::packet::{GroupId, Label, NodeId, Packet, PortId};
use crate::pipeline::state::{extract_key, StateChange, StateTable};
use crate::time::Time;

/// What to do with a packet no flow entry matches.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MissPolicy {
    Drop,
    ToController,
}

/// Why the pipeline consumed a packet without emitting it.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DropCause {
    TableMiss,
    DropAction,
    NoLiveBucket,
}

/// Everything a single packet's traversal of the pipeline produced.
#[derive(Clone, Debug, Default)]
pub struct Forwarding {
    /// (egress port, packet) emissions in execution order.
    pub emissions: Vec<(PortId, Packet)>,
    /// Packets punted to the controller.
    pub punts: Vec<Packet>,
    /// Set when an explicit drop happened somewhere along the way.
    pub dropped: Option<DropCause>,
    /// State label the packet matched (None when no state table).
    pub matched_state: Option<Label>,
    /// Every state transition this traversal caused, timed at the instant
    /// it logically happened (expiries carry the expiry instant).
    pub state_changes: Vec<StateChange>,
}

const MAX_GROUP_DEPTH: usize = 8;

/// Switch configuration as produced by the rule compilers.
#[derive(Clone, Debug, Default)]
pub struct SwitchConfig {
    pub state_table: Option<StateTable>,
    pub flows: Vec<FlowEntry>,
    pub groups: Vec<GroupEntry>,
    pub miss_policy: Option<MissPolicy>,
}

#[derive(Debug)]
pub struct Switch {
    pub id: NodeId,
    state_table: Option<StateTable>,
    flow_table: Vec<FlowEntry>,
    groups: BTreeMap<GroupId, GroupEntry>,
    ports: BTreeMap<PortId, bool>,
    miss_policy: MissPolicy,
    rng: ChaCha8Rng,
}

impl Switch {
    pub fn new(id: NodeId, ports: impl IntoIterator<Item = PortId>, seed: u64) -> Switch {
        Switch {
            id,
            state_table: None,
            flow_table: Vec::new(),
            groups: BTreeMap::new(),
            ports: ports.into_iter().map(|p| (p, true)).collect(),
            miss_policy: MissPolicy::Drop,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_config(
        id: NodeId,
        ports: impl IntoIterator<Item = PortId>,
        seed: u64,
        config: SwitchConfig,
    ) -> Switch {
        let mut sw = Switch::new(id, ports, seed);
        sw.state_table = config.state_table;
        sw.flow_table = config.flows;
        for g in config.groups {
            sw.groups.insert(g.id, g);
        }
        if let Some(p) = config.miss_policy {
            sw.miss_policy = p;
        }
        sw
    }

    pub fn miss_policy(&self) -> MissPolicy {
        self.miss_policy
    }

    pub fn set_miss_policy(&mut self, policy: MissPolicy) {
        self.miss_policy = policy;
    }

    pub fn state_table(&self) -> Option<&StateTable> {
        self.state_table.as_ref()
    }

    pub fn state_table_mut(&mut self) -> Option<&mut StateTable> {
        self.state_table.as_mut()
    }

    pub fn set_state_table(&mut self, table: StateTable) {
        self.state_table = Some(table);
    }

    pub fn ports(&self) -> impl Iterator<Item = (PortId, bool)> + '_ {
        self.ports.iter().map(|(&p, &up)| (p, up))
    }

    pub fn set_port(&mut self, port: PortId, up: bool) {
        self.ports.insert(port, up);
    }

    pub fn port_up(&self, port: PortId) -> bool {
        *self.ports.get(&port).unwrap_or(&false)
    }

    pub fn install_flow(&mut self, entry: FlowEntry) {
        self.flow_table.push(entry);
    }

    /// Removes entries with exactly this priority and condition list.
    /// Returns how many were removed.
    pub fn remove_flows(&mut self, priority: u32, conditions: &[Condition]) -> usize {
        let before = self.flow_table.len();
        self.flow_table
            .retain(|e| !(e.matcher.priority == priority && e.matcher.conditions == conditions));
        before - self.flow_table.len()
    }

    pub fn flow_table(&self) -> &[FlowEntry] {
        &self.flow_table
    }

    pub fn group(&self, id: GroupId) -> Option<&GroupEntry> {
        self.groups.get(&id)
    }

    pub fn install_group(&mut self, group: GroupEntry) {
        self.groups.insert(group.id, group);
    }

    /// Highest-priority entry whose conditions all hold; ties break toward
    /// the earlier-installed entry.
    pub fn flow_match(&self, packet: &Packet, state: Label) -> Result<usize, PipelineError> {
        let mut best: Option<(usize, u32)> = None;
        for (i, entry) in self.flow_table.iter().enumerate() {
            if !entry.matcher.matches(packet, state) {
                continue;
            }
            match best {
                Some((_, p)) if entry.matcher.priority <= p => {}
                _ => best = Some((i, entry.matcher.priority)),
            }
        }
        best.map(|(i, _)| i).ok_or(PipelineError::NoMatch)
    }

    /// Runs one packet through state lookup, flow match, and the matched
    /// action list. Set-state writes are visible to later actions and to
    /// any re-entrant packet; a table miss follows the miss policy.
    pub fn process_packet(&mut self, packet: Packet, now: Time) -> Result<Forwarding, PipelineError> {
        let mut out = Forwarding::default();
        let state = match self.state_table.as_mut() {
            Some(table) => {
                let label = table.lookup(&packet, now, &mut out.state_changes)?;
                out.matched_state = Some(label);
                label
            }
            None => 0,
        };
        let entry_idx = match self.flow_match(&packet, state) {
            Ok(i) => i,
            Err(PipelineError::NoMatch) => {
                match self.miss_policy {
                    MissPolicy::Drop => out.dropped = Some(DropCause::TableMiss),
                    MissPolicy::ToController => out.punts.push(packet),
                }
                return Ok(out);
            }
            Err(e) => return Err(e),
        };
        let actions = self.flow_table[entry_idx].actions.clone();
        let mut packet = packet;
        self.execute_actions(&mut packet, &actions, now, &mut out, 0)?;
        Ok(out)
    }

    /// Executes one group on (a copy of) the packet and reports the same
    /// way `process_packet` does. Selection state (rng, round-robin
    /// cursor) advances as a side effect.
    pub fn group_execute(
        &mut self,
        packet: &Packet,
        gid: GroupId,
        now: Time,
    ) -> Result<Forwarding, PipelineError> {
        let mut out = Forwarding::default();
        let mut packet = packet.clone();
        self.run_group(&mut packet, gid, now, &mut out, 0)?;
        Ok(out)
    }

    fn execute_actions(
        &mut self,
        packet: &mut Packet,
        actions: &[Action],
        now: Time,
        out: &mut Forwarding,
        depth: usize,
    ) -> Result<(), PipelineError> {
        for action in actions {
            match action {
                Action::Output(port) => out.emissions.push((*port, packet.clone())),
                Action::PushTag(label) => packet.push_tag(*label)?,
                Action::PopTag => {
                    packet.pop_tag()?;
                }
                Action::SetState(args) => {
                    let table = self.state_table.as_mut().ok_or_else(|| {
                        PipelineError::MalformedAction(
                            "set_state on a switch without a state table".into(),
                        )
                    })?;
                    table.apply_set(packet, args, now, &mut out.state_changes)?;
                }
                Action::Group(gid) => self.run_group(packet, *gid, now, out, depth)?,
                Action::Drop => {
                    out.dropped = Some(DropCause::DropAction);
                    return Ok(());
                }
                Action::ToController => out.punts.push(packet.clone()),
            }
        }
        Ok(())
    }

    fn run_group(
        &mut self,
        packet: &mut Packet,
        gid: GroupId,
        now: Time,
        out: &mut Forwarding,
        depth: usize,
    ) -> Result<(), PipelineError> {
        if depth >= MAX_GROUP_DEPTH {
            return Err(PipelineError::GroupDepthExceeded(MAX_GROUP_DEPTH));
        }
        let group = self
            .groups
            .get(&gid)
            .ok_or(PipelineError::UnknownGroup(gid))?;
        if group.buckets.is_empty() {
            return Err(PipelineError::EmptyGroup(gid));
        }
        let kind = group.kind.clone();
        match kind {
            GroupKind::All => {
                // Each bucket sees its own copy; mutations never leak
                // across buckets or back to the caller's packet.
                let n = self.groups[&gid].buckets.len();
                for i in 0..n {
                    let actions = self.groups[&gid].buckets[i].actions.clone();
                    let mut copy = packet.clone();
                    self.execute_actions(&mut copy, &actions, now, out, depth + 1)?;
                }
            }
            GroupKind::FastFailover => {
                // Pure function of port status and config; no rng.
                let mut chosen: Option<Vec<Action>> = None;
                for bucket in &self.groups[&gid].buckets {
                    match bucket.watch_port {
                        Some(p) if self.port_up(p) => {
                            chosen = Some(bucket.actions.clone());
                            break;
                        }
                        Some(_) => continue,
                        None => {
                            chosen = Some(bucket.actions.clone());
                            break;
                        }
                    }
                }
                match chosen {
                    Some(actions) => {
                        let mut copy = packet.clone();
                        self.execute_actions(&mut copy, &actions, now, out, depth + 1)?;
                    }
                    None => out.dropped = Some(DropCause::NoLiveBucket),
                }
            }
            GroupKind::SelectRandom => {
                let total = self.groups[&gid].total_weight();
                let draw = self.rng.gen_range(0..total);
                let mut acc = 0u64;
                let mut idx = 0;
                for (i, b) in self.groups[&gid].buckets.iter().enumerate() {
                    acc += b.weight as u64;
                    if draw < acc {
                        idx = i;
                        break;
                    }
                }
                let actions = self.groups[&gid].buckets[idx].actions.clone();
                let mut copy = packet.clone();
                self.execute_actions(&mut copy, &actions, now, out, depth + 1)?;
            }
            GroupKind::SelectHash(scope) => {
                let key = extract_key(packet, &scope)?;
                let idx = (stable_hash(&key.0) % self.groups[&gid].buckets.len() as u64) as usize;
                let actions = self.groups[&gid].buckets[idx].actions.clone();
                let mut copy = packet.clone();
                self.execute_actions(&mut copy, &actions, now, out, depth + 1)?;
            }
            GroupKind::SelectRoundRobin => {
                let group = self.groups.get_mut(&gid).expect("group exists");
                let idx = group.rr_cursor % group.buckets.len();
                group.rr_cursor = group.rr_cursor.wrapping_add(1);
                let actions = group.buckets[idx].actions.clone();
                let mut copy = packet.clone();
                self.execute_actions(&mut copy, &actions, now, out, depth + 1)?;
            }
        }
        Ok(())
    }

    /// Diagnostic dump: one tab-separated line per state, flow, and group
    /// entry in a stable order, for golden tests.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        if let Some(table) = &self.state_table {
            for (key, e) in table.iter_sorted() {
                let idle = e
                    .idle_timeout
                    .map(|d| d.to_string())
                    .unwrap_or_else(|| "-".into());
                let hard = e
                    .hard_timeout
                    .map(|d| d.to_string())
                    .unwrap_or_else(|| "-".into());
                let _ = writeln!(
                    s,
                    "state\t{key}\t{}\t{idle}\t{hard}\t{}\t{}\t{}\t{}",
                    e.label, e.idle_rollback, e.hard_rollback, e.installed_at, e.last_hit
                );
            }
        }
        for entry in &self.flow_table {
            let conds = if entry.matcher.conditions.is_empty() {
                "*".to_string()
            } else {
                entry
                    .matcher
                    .conditions
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            };
            let acts = entry
                .actions
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(s, "flow\t{}\t{conds}\t{acts}", entry.matcher.priority);
        }
        for group in self.groups.values() {
            let buckets = group
                .buckets
                .iter()
                .map(|b| {
                    let watch = b
                        .watch_port
                        .map(|p| p.to_string())
                        .unwrap_or_else(|| "-".into());
                    let acts = b
                        .actions
                        .iter()
                        .map(|a| a.to_string())
                        .collect::<Vec<_>>()
                        .join(";");
                    format!("{watch}:{}:{acts}", b.weight)
                })
                .collect::<Vec<_>>()
                .join("|");
            let _ = writeln!(s, "group\t{}\t{}\t{buckets}", group.id, group.kind);
        }
        s
    }
}
