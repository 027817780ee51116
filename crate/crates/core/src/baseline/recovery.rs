//! Failure recovery by controller: the detect node has no local
//! alternative, so packets drop while a port-down notification rides to
//! the controller, which switches the affected demands onto their detours
//! by updating the reroute node's flow table. Port-up removes the detour
//! entries again.

use std::collections::BTreeMap;

use crate::apps::{ProtectedDemand, ReroutePlan};
use crate::error::ConfigError;
use crate::pipeline::{
    Action, Bucket, Condition, FieldValue, FlowEntry, GroupKind, HeaderField, Match, MatchField,
    MissPolicy, NodeId, Packet, PortId, SwitchConfig,
};
use crate::simnet::{ControllerHandler, CtrlCmd, NodeKind, Topology};
use crate::time::Time;

const PRIO_PRIMARY: u32 = 10;
const PRIO_DETOUR: u32 = 60;

/// One precomputed reaction: when `detect`'s `watch_port` goes down,
/// steer `dst_value` onto `detour_port` at `reroute`.
#[derive(Clone, Debug)]
struct PlanEntry {
    reroute: NodeId,
    dst_value: FieldValue,
    detour_port: PortId,
}

/// Controller side: precomputed reroute plans, exercised on port status.
pub struct ReactiveRecoveryApp {
    plans: BTreeMap<(NodeId, PortId), Vec<PlanEntry>>,
}

impl ReactiveRecoveryApp {
    fn detour_match(dst_value: FieldValue) -> Vec<Condition> {
        vec![Condition {
            field: MatchField::Field(HeaderField::IpDst),
            value: dst_value,
        }]
    }
}

impl ControllerHandler for ReactiveRecoveryApp {
    fn on_packet_in(&mut self, _: NodeId, _: &Packet, _: Time) -> Vec<CtrlCmd> {
        Vec::new()
    }

    fn on_port_status(&mut self, switch: NodeId, port: PortId, up: bool, _now: Time) -> Vec<CtrlCmd> {
        let Some(entries) = self.plans.get(&(switch, port)) else {
            // No plan: affected packets keep dropping; surfaced by the
            // simulator's message audit log.
            return Vec::new();
        };
        entries
            .iter()
            .map(|e| {
                if up {
                    CtrlCmd::RemoveFlow {
                        switch: e.reroute,
                        priority: PRIO_DETOUR,
                        conditions: Self::detour_match(e.dst_value),
                    }
                } else {
                    CtrlCmd::InstallFlow {
                        switch: e.reroute,
                        entry: FlowEntry::new(
                            Match {
                                priority: PRIO_DETOUR,
                                conditions: Self::detour_match(e.dst_value),
                            },
                            vec![Action::Output(e.detour_port)],
                        ),
                    }
                }
            })
            .collect()
    }
}

/// Switch configs plus the controller app for the reactive variant.
///
/// Primary paths forward by destination; detour paths are pre-provisioned
/// as destination rules on the detour nodes (inactive until the reroute
/// node is updated); the detect node watches its primary port through a
/// fast-failover group with no fallback bucket.
pub fn build_of_recovery(
    topo: &Topology,
    demands: &[ProtectedDemand],
) -> Result<(BTreeMap<NodeId, SwitchConfig>, ReactiveRecoveryApp), ConfigError> {
    let mut configs: BTreeMap<NodeId, SwitchConfig> = BTreeMap::new();
    let mut plans: BTreeMap<(NodeId, PortId), Vec<PlanEntry>> = BTreeMap::new();

    for demand in demands {
        let primary = &demand.primary;
        if primary.len() < 2 {
            return Err(ConfigError::new("primary path needs at least two switches"));
        }
        for n in primary {
            if topo.node_kind(*n) != Some(NodeKind::Switch) {
                return Err(ConfigError::new(format!("primary node {n} is not a switch")));
            }
        }
        let v = demand.dst_value;
        let host_port = {
            let l = topo.link(topo.host_uplink(demand.dst_host)?);
            l.opposite(demand.dst_host).1
        };
        let mut detect_for: BTreeMap<NodeId, PortId> = BTreeMap::new();
        for plan in &demand.plans {
            let (detect, watch) = detect_and_watch(topo, demand, plan)?;
            detect_for.insert(detect, watch);
        }

        for (i, &node) in primary.iter().enumerate() {
            let egress = if i + 1 < primary.len() {
                topo.port_towards(node, primary[i + 1])
                    .ok_or_else(|| ConfigError::new(format!("no link {node}-{}", primary[i + 1])))?
            } else {
                host_port
            };
            let cfg = configs.entry(node).or_default();
            if let Some(&watch) = detect_for.get(&node) {
                // Watch-only fast-failover: drops on failure, which is
                // exactly the loss window under study.
                let buckets = vec![Bucket::watching(watch, vec![Action::Output(watch)])];
                let gid = ensure_group(cfg, GroupKind::FastFailover, buckets);
                push_unique(cfg, FlowEntry::new(
                    Match::any(PRIO_PRIMARY).field(HeaderField::IpDst, v),
                    vec![Action::Group(gid)],
                ));
            } else {
                push_unique(cfg, FlowEntry::new(
                    Match::any(PRIO_PRIMARY).field(HeaderField::IpDst, v),
                    vec![Action::Output(egress)],
                ));
            }
        }

        for plan in &demand.plans {
            let (detect, watch) = detect_and_watch(topo, demand, plan)?;
            let detour = &plan.detour;
            let rejoin = *detour.last().unwrap();
            let rejoin_idx = primary
                .iter()
                .position(|&n| n == rejoin)
                .ok_or_else(|| ConfigError::new(format!("detour must rejoin primary, {rejoin} does not")))?;
            // Pre-provisioned detour forwarding by destination.
            for w in detour.windows(2).skip(1) {
                let port = topo
                    .port_towards(w[0], w[1])
                    .ok_or_else(|| ConfigError::new(format!("no link {}-{}", w[0], w[1])))?;
                push_unique(configs.entry(w[0]).or_default(), FlowEntry::new(
                    Match::any(PRIO_PRIMARY).field(HeaderField::IpDst, v),
                    vec![Action::Output(port)],
                ));
            }
            let _ = rejoin_idx; // rejoin node already forwards by primary rule
            let detour_port = topo
                .port_towards(plan.reroute, detour[1])
                .ok_or_else(|| ConfigError::new(format!("no link {}-{}", plan.reroute, detour[1])))?;
            plans.entry((detect, watch)).or_default().push(PlanEntry {
                reroute: plan.reroute,
                dst_value: v,
                detour_port,
            });
        }
    }

    for cfg in configs.values_mut() {
        cfg.miss_policy = Some(MissPolicy::Drop);
    }
    Ok((configs, ReactiveRecoveryApp { plans }))
}

fn detect_and_watch(
    topo: &Topology,
    demand: &ProtectedDemand,
    plan: &ReroutePlan,
) -> Result<(NodeId, PortId), ConfigError> {
    let (a, b) = plan.failed_link;
    let primary = &demand.primary;
    let ia = primary.iter().position(|&n| n == a);
    let ib = primary.iter().position(|&n| n == b);
    let (detect, element) = match (ia, ib) {
        (Some(ia), Some(ib)) if ia.abs_diff(ib) == 1 => {
            if ia > ib {
                (b, a)
            } else {
                (a, b)
            }
        }
        _ => {
            return Err(ConfigError::new(format!(
                "failed link ({a},{b}) is not a primary-path hop"
            )))
        }
    };
    let watch = topo
        .port_towards(detect, element)
        .ok_or_else(|| ConfigError::new(format!("no link {detect}-{element}")))?;
    Ok((detect, watch))
}

fn push_unique(cfg: &mut SwitchConfig, entry: FlowEntry) {
    if !cfg.flows.iter().any(|e| e.matcher == entry.matcher) {
        cfg.flows.push(entry);
    }
}

fn ensure_group(
    cfg: &mut SwitchConfig,
    kind: GroupKind,
    buckets: Vec<Bucket>,
) -> crate::pipeline::GroupId {
    for g in &cfg.groups {
        if g.kind == kind && g.buckets == buckets {
            return g.id;
        }
    }
    let gid = crate::pipeline::GroupId(cfg.groups.len() as u32 + 1);
    cfg.groups
        .push(crate::pipeline::GroupEntry::new(gid, kind, buckets));
    gid
}
