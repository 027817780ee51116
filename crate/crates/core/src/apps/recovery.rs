//! Controller-independent failure recovery.
//!
//! A detect node adjacent to the failure bounces data packets back along
//! the primary path, tagged with the id of the unreachable element. The
//! first bounced packet flips a reroute node's per-demand state machine to
//! F_i, which pins the demand onto a preallocated detour; a hard timeout
//! periodically moves F_i to P_i, and the next packet in P_i is duplicated
//! into a detour copy and a probe sent down the primary. A probe that
//! comes back means the element is reachable again: state returns to 0
//! and primary forwarding resumes.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::ConfigError;
use crate::pipeline::{
    Action, Bucket, FieldValue, FlowEntry, GroupEntry, GroupId, GroupKind, HeaderField, Label,
    Match, MissPolicy, NodeId, PortId, ScopeSpec, SetStateArgs, StateTable, SwitchConfig,
};
use crate::simnet::{NodeKind, Topology};
use crate::time::Dur;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TagKind {
    /// "Element i unreachable, use the detour."
    Failure,
    /// "Probe in flight for element i."
    Probe,
}

/// Tag label codec: `2 * element_id + kind bit` (failure 0, probe 1).
/// Injective over (kind, element), so tags never collide across elements.
pub struct TagCode;

impl TagCode {
    pub fn encode(kind: TagKind, element: NodeId) -> Label {
        let bit = match kind {
            TagKind::Failure => 0,
            TagKind::Probe => 1,
        };
        2 * element.0 as Label + bit
    }

    pub fn decode(label: Label) -> (TagKind, NodeId) {
        let kind = if label.is_multiple_of(2) {
            TagKind::Failure
        } else {
            TagKind::Probe
        };
        (kind, NodeId((label / 2) as u32))
    }

    pub fn failure(element: NodeId) -> Label {
        TagCode::encode(TagKind::Failure, element)
    }

    pub fn probe(element: NodeId) -> Label {
        TagCode::encode(TagKind::Probe, element)
    }
}

/// How one demand survives one protected failure.
#[derive(Clone, Debug)]
pub struct ReroutePlan {
    /// The protected link; its downstream endpoint on the primary path is
    /// the failure element whose id goes into the tags.
    pub failed_link: (NodeId, NodeId),
    pub reroute: NodeId,
    /// Detour from the reroute node back onto the primary path.
    pub detour: Vec<NodeId>,
    /// Probe period: hard timeout of the F state.
    pub delta: Dur,
}

#[derive(Clone, Debug)]
pub struct ProtectedDemand {
    pub src_host: NodeId,
    pub dst_host: NodeId,
    /// ip_dst value identifying the demand in matches.
    pub dst_value: FieldValue,
    /// Switch-level primary path, source switch first.
    pub primary: Vec<NodeId>,
    pub plans: Vec<ReroutePlan>,
}

const PRIO_PRIMARY: u32 = 10;
/// Reroute FSM rules for untagged packets (state-dependent forwarding).
const PRIO_FSM: u32 = 46;
/// Reroute FSM rules for already-tagged packets.
const PRIO_FSM_TAGGED: u32 = 48;
/// Tag-steering rules on bounce, detour, detect, and element nodes.
const PRIO_TAG: u32 = 50;

/// Per-switch accumulator with content dedup. Conflicting rules (same
/// priority and conditions, different actions) are a compile error: they
/// would silently shadow by insertion order.
#[derive(Default)]
struct NodeBuilder {
    state_scope: Option<ScopeSpec>,
    flows: Vec<FlowEntry>,
    groups: Vec<GroupEntry>,
}

impl NodeBuilder {
    fn ensure_state_scope(&mut self, scope: &ScopeSpec) -> Result<(), ConfigError> {
        match &self.state_scope {
            None => {
                self.state_scope = Some(scope.clone());
                Ok(())
            }
            Some(existing) if existing == scope => Ok(()),
            Some(existing) => Err(ConfigError::new(format!(
                "conflicting state scopes {existing} and {scope} on one switch"
            ))),
        }
    }

    fn add_flow(&mut self, entry: FlowEntry) -> Result<(), ConfigError> {
        for existing in &self.flows {
            if existing.matcher == entry.matcher {
                if existing.actions == entry.actions {
                    return Ok(()); // identical rule from another demand
                }
                return Err(ConfigError::new(format!(
                    "rule collision: two actions for priority {} conditions {:?}",
                    entry.matcher.priority, entry.matcher.conditions
                )));
            }
        }
        self.flows.push(entry);
        Ok(())
    }

    fn add_group(&mut self, kind: GroupKind, buckets: Vec<Bucket>) -> GroupId {
        for g in &self.groups {
            if g.kind == kind && g.buckets == buckets {
                return g.id;
            }
        }
        let id = GroupId(self.groups.len() as u32 + 1);
        self.groups.push(GroupEntry::new(id, kind, buckets));
        id
    }

    fn finish(self) -> Result<SwitchConfig, ConfigError> {
        let state_table = match self.state_scope {
            Some(scope) => Some(StateTable::new(scope.clone(), scope)?),
            None => None,
        };
        Ok(SwitchConfig {
            state_table,
            flows: self.flows,
            groups: self.groups,
            miss_policy: Some(MissPolicy::Drop),
        })
    }
}

fn port_towards(topo: &Topology, from: NodeId, to: NodeId) -> Result<PortId, ConfigError> {
    topo.port_towards(from, to)
        .ok_or_else(|| ConfigError::new(format!("no link between {from} and {to}")))
}

/// The tag labels marking probes, for metrics classification.
pub fn probe_labels(demands: &[ProtectedDemand]) -> BTreeSet<Label> {
    let mut set = BTreeSet::new();
    for d in demands {
        for p in &d.plans {
            if let Ok(e) = failed_element(d, p) {
                set.insert(TagCode::probe(e));
            }
        }
    }
    set
}

/// The unreachable node: the failed link endpoint that sits farther along
/// the primary path.
fn failed_element(demand: &ProtectedDemand, plan: &ReroutePlan) -> Result<NodeId, ConfigError> {
    let (a, b) = plan.failed_link;
    let ia = demand.primary.iter().position(|&n| n == a);
    let ib = demand.primary.iter().position(|&n| n == b);
    match (ia, ib) {
        (Some(ia), Some(ib)) if ia.abs_diff(ib) == 1 => {
            Ok(if ia > ib { a } else { b })
        }
        _ => Err(ConfigError::new(format!(
            "failed link ({a},{b}) is not a primary-path hop of demand to {}",
            demand.dst_host
        ))),
    }
}

/// Compiles primary forwarding plus the full protection machinery for
/// every demand onto the switches they touch.
pub fn build_failure_recovery(
    topo: &Topology,
    demands: &[ProtectedDemand],
) -> Result<BTreeMap<NodeId, SwitchConfig>, ConfigError> {
    let mut builders: BTreeMap<NodeId, NodeBuilder> = BTreeMap::new();
    for demand in demands {
        compile_demand(topo, demand, &mut builders)?;
    }
    let mut out = BTreeMap::new();
    for (node, b) in builders {
        out.insert(node, b.finish()?);
    }
    Ok(out)
}

fn compile_demand(
    topo: &Topology,
    demand: &ProtectedDemand,
    builders: &mut BTreeMap<NodeId, NodeBuilder>,
) -> Result<(), ConfigError> {
    let primary = &demand.primary;
    if primary.len() < 2 {
        return Err(ConfigError::new("primary path needs at least two switches"));
    }
    for n in primary {
        if topo.node_kind(*n) != Some(NodeKind::Switch) {
            return Err(ConfigError::new(format!("primary node {n} is not a switch")));
        }
    }
    // Hosts hang off the path ends.
    let src_link = topo.host_uplink(demand.src_host)?;
    if topo.link(src_link).opposite(demand.src_host).0 != primary[0] {
        return Err(ConfigError::new(format!(
            "source host {} is not attached to the first primary switch",
            demand.src_host
        )));
    }
    let dst_link = topo.host_uplink(demand.dst_host)?;
    let last = *primary.last().unwrap();
    if topo.link(dst_link).opposite(demand.dst_host).0 != last {
        return Err(ConfigError::new(format!(
            "destination host {} is not attached to the last primary switch",
            demand.dst_host
        )));
    }

    let v = demand.dst_value;

    // Primary forwarding along the path, host egress at the end. Detect
    // nodes get their plain rule replaced by a fast-failover group below.
    let detect_nodes: BTreeSet<NodeId> = demand
        .plans
        .iter()
        .map(|p| {
            let e = failed_element(demand, p)?;
            let ei = primary.iter().position(|&n| n == e).unwrap();
            if ei == 0 {
                return Err(ConfigError::new("failure element has no primary predecessor"));
            }
            Ok(primary[ei - 1])
        })
        .collect::<Result<_, _>>()?;
    for (i, &node) in primary.iter().enumerate() {
        let egress = if i + 1 < primary.len() {
            port_towards(topo, node, primary[i + 1])?
        } else {
            let l = topo.link(dst_link);
            l.opposite(demand.dst_host).1
        };
        if detect_nodes.contains(&node) && i + 1 < primary.len() {
            continue;
        }
        builders.entry(node).or_default().add_flow(FlowEntry::new(
            Match::any(PRIO_PRIMARY).field(HeaderField::IpDst, v),
            vec![Action::Output(egress)],
        ))?;
    }

    for plan in &demand.plans {
        compile_plan(topo, demand, plan, builders)?;
    }
    Ok(())
}

fn compile_plan(
    topo: &Topology,
    demand: &ProtectedDemand,
    plan: &ReroutePlan,
    builders: &mut BTreeMap<NodeId, NodeBuilder>,
) -> Result<(), ConfigError> {
    let primary = &demand.primary;
    let v = demand.dst_value;
    let element = failed_element(demand, plan)?;
    let e_idx = primary.iter().position(|&n| n == element).unwrap();
    let d_idx = e_idx - 1;
    let detect = primary[d_idx];
    let r_idx = primary
        .iter()
        .position(|&n| n == plan.reroute)
        .ok_or_else(|| ConfigError::new(format!("reroute node {} not on primary", plan.reroute)))?;
    if r_idx >= d_idx {
        return Err(ConfigError::new(format!(
            "reroute node {} must precede the detect node {detect}",
            plan.reroute
        )));
    }
    if plan.detour.first() != Some(&plan.reroute) {
        return Err(ConfigError::new("detour must start at the reroute node"));
    }
    if plan.detour.len() < 2 {
        return Err(ConfigError::new("detour needs at least one hop"));
    }
    let rejoin = *plan.detour.last().unwrap();
    let rejoin_idx = primary
        .iter()
        .position(|&n| n == rejoin)
        .ok_or_else(|| ConfigError::new(format!("detour must rejoin the primary, {rejoin} does not")))?;
    // Rejoining at the element itself is fine for a link failure: the
    // detour reaches the far side of the broken link.
    if rejoin_idx < e_idx {
        return Err(ConfigError::new(format!(
            "detour rejoins at {rejoin} before the failure element {element}"
        )));
    }
    if plan.delta == Dur::ZERO {
        return Err(ConfigError::new("probe period delta must be positive"));
    }

    let f_tag = TagCode::failure(element);
    let p_tag = TagCode::probe(element);
    let scope = ScopeSpec::new(vec![HeaderField::IpDst])?;

    // (a) detect node: fast-failover between the primary port and a
    // bounce-back bucket; probes are never bounced — with the watched
    // port down they drop, so a bounced probe can only mean repair.
    {
        let to_element = port_towards(topo, detect, element)?;
        let to_upstream = port_towards(topo, detect, primary[d_idx - 1])?;
        let b = builders.entry(detect).or_default();
        let g_data = b.add_group(
            GroupKind::FastFailover,
            vec![
                Bucket::watching(to_element, vec![Action::Output(to_element)]),
                Bucket::new(vec![Action::PushTag(f_tag), Action::Output(to_upstream)]),
            ],
        );
        let g_probe = b.add_group(
            GroupKind::FastFailover,
            vec![Bucket::watching(to_element, vec![Action::Output(to_element)])],
        );
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, p_tag)
                .field(HeaderField::InPort, to_upstream.0 as u64),
            vec![Action::Group(g_probe)],
        ))?;
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, p_tag)
                .field(HeaderField::InPort, to_element.0 as u64),
            vec![Action::Output(to_upstream)],
        ))?;
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_PRIMARY).field(HeaderField::IpDst, v),
            vec![Action::Group(g_data)],
        ))?;
    }

    // (b) bounce segment: tagged packets shuttle between reroute and
    // detect; direction comes from the ingress port.
    for i in (r_idx + 1)..d_idx {
        let node = primary[i];
        let up = port_towards(topo, node, primary[i - 1])?;
        let down = port_towards(topo, node, primary[i + 1])?;
        let b = builders.entry(node).or_default();
        for tag in [f_tag, p_tag] {
            b.add_flow(FlowEntry::new(
                Match::any(PRIO_TAG)
                    .field(HeaderField::TagLabel, tag)
                    .field(HeaderField::InPort, down.0 as u64),
                vec![Action::Output(up)],
            ))?;
        }
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, p_tag)
                .field(HeaderField::InPort, up.0 as u64),
            vec![Action::Output(down)],
        ))?;
    }

    // (c) reroute node Mealy machine over {0, F, P}, keyed by the
    // demand's destination.
    {
        let to_primary = port_towards(topo, plan.reroute, primary[r_idx + 1])?;
        let to_detour = port_towards(topo, plan.reroute, plan.detour[1])?;
        let b = builders.entry(plan.reroute).or_default();
        b.ensure_state_scope(&scope)?;
        let arm_f = SetStateArgs::new(f_tag)
            .hard(plan.delta)
            .hard_rollback(p_tag);
        let g_all = b.add_group(
            GroupKind::All,
            vec![
                Bucket::new(vec![Action::PushTag(f_tag), Action::Output(to_detour)]),
                Bucket::new(vec![Action::PushTag(p_tag), Action::Output(to_primary)]),
            ],
        );
        // Returning probe: failure resolved, back to state 0 and primary.
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, p_tag)
                .field(HeaderField::InPort, to_primary.0 as u64),
            vec![
                Action::SetState(SetStateArgs::new(0)),
                Action::PopTag,
                Action::Output(to_primary),
            ],
        ))?;
        // First bounced packet: enter F and enable the detour (tag kept).
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .state(0)
                .field(HeaderField::TagLabel, f_tag)
                .field(HeaderField::IpDst, v),
            vec![Action::SetState(arm_f.clone()), Action::Output(to_detour)],
        ))?;
        // Later bounced packets while already deviated.
        for state in [f_tag, p_tag] {
            b.add_flow(FlowEntry::new(
                Match::any(PRIO_FSM_TAGGED)
                    .state(state)
                    .field(HeaderField::TagLabel, f_tag)
                    .field(HeaderField::IpDst, v),
                vec![Action::Output(to_detour)],
            ))?;
        }
        // Fresh packets of a deviated demand get the tag pushed here.
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_FSM).state(f_tag).field(HeaderField::IpDst, v),
            vec![Action::PushTag(f_tag), Action::Output(to_detour)],
        ))?;
        // P serves exactly one packet: duplicate into detour copy plus
        // probe, then back to F for the next delta period.
        b.add_flow(FlowEntry::new(
            Match::any(PRIO_FSM).state(p_tag).field(HeaderField::IpDst, v),
            vec![Action::Group(g_all), Action::SetState(arm_f)],
        ))?;
    }

    // (d) detour nodes steer by tag; the rejoin node pops and puts the
    // packet back on the primary.
    for i in 1..plan.detour.len() - 1 {
        let node = plan.detour[i];
        let next = port_towards(topo, node, plan.detour[i + 1])?;
        builders.entry(node).or_default().add_flow(FlowEntry::new(
            Match::any(PRIO_TAG).field(HeaderField::TagLabel, f_tag),
            vec![Action::Output(next)],
        ))?;
    }
    {
        let continuation = if rejoin_idx + 1 < primary.len() {
            port_towards(topo, rejoin, primary[rejoin_idx + 1])?
        } else {
            let l = topo.link(topo.host_uplink(demand.dst_host)?);
            l.opposite(demand.dst_host).1
        };
        builders.entry(rejoin).or_default().add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, f_tag)
                .field(HeaderField::IpDst, v),
            vec![Action::PopTag, Action::Output(continuation)],
        ))?;
    }

    // (e) the repaired element bounces probes straight back.
    {
        let to_detect = port_towards(topo, element, detect)?;
        builders.entry(element).or_default().add_flow(FlowEntry::new(
            Match::any(PRIO_TAG)
                .field(HeaderField::TagLabel, p_tag)
                .field(HeaderField::InPort, to_detect.0 as u64),
            vec![Action::Output(to_detect)],
        ))?;
    }

    Ok(())
}
