//! Static checks over compiled switch configurations: dangling ports and
//! groups, unproducible state labels in matches, conflicting rules, and a
//! tag walk verifying every pushed tag is popped before reaching a host.

use std::collections::{BTreeMap, BTreeSet};

use crate::pipeline::{
    Action, GroupId, GroupKind, Label, MatchField, NodeId, PortId, SwitchConfig,
};
use crate::simnet::{NodeKind, Topology};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub node: Option<NodeId>,
    pub message: String,
}

impl Diagnostic {
    fn at(node: NodeId, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            node: Some(node),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.node {
            Some(n) => write!(f, "node {n}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Runs all checks; an empty list means the configuration is consistent.
pub fn validate_config(
    topo: &Topology,
    configs: &BTreeMap<NodeId, SwitchConfig>,
) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for (&node, cfg) in configs {
        check_ports_and_groups(topo, node, cfg, &mut diags);
        check_state_labels(node, cfg, &mut diags);
        check_conflicts(node, cfg, &mut diags);
    }
    check_tag_walks(topo, configs, &mut diags);
    diags
}

fn actions_of(cfg: &SwitchConfig) -> impl Iterator<Item = &Action> {
    cfg.flows
        .iter()
        .flat_map(|f| f.actions.iter())
        .chain(cfg.groups.iter().flat_map(|g| g.buckets.iter().flat_map(|b| b.actions.iter())))
}

fn check_ports_and_groups(
    topo: &Topology,
    node: NodeId,
    cfg: &SwitchConfig,
    diags: &mut Vec<Diagnostic>,
) {
    let group_ids: BTreeSet<GroupId> = cfg.groups.iter().map(|g| g.id).collect();
    for action in actions_of(cfg) {
        match action {
            Action::Output(p) => {
                if topo.link_at(node, *p).is_none() {
                    diags.push(Diagnostic::at(node, format!("output on unlinked port {p}")));
                }
            }
            Action::Group(g) if !group_ids.contains(g) => {
                diags.push(Diagnostic::at(node, format!("reference to unknown group {g}")));
            }
            _ => {}
        }
    }
    for g in &cfg.groups {
        if g.buckets.is_empty() {
            diags.push(Diagnostic::at(node, format!("group {} has no buckets", g.id)));
        }
        for b in &g.buckets {
            if let Some(w) = b.watch_port {
                if topo.link_at(node, w).is_none() {
                    diags.push(Diagnostic::at(
                        node,
                        format!("group {} watches unlinked port {w}", g.id),
                    ));
                }
            }
        }
        if g.kind == GroupKind::FastFailover {
            let n = g.buckets.len();
            for (i, b) in g.buckets.iter().enumerate() {
                if b.watch_port.is_none() && i + 1 != n {
                    diags.push(Diagnostic::at(
                        node,
                        format!("group {}: unwatched bucket {i} is not last", g.id),
                    ));
                }
            }
        }
    }
}

fn check_state_labels(node: NodeId, cfg: &SwitchConfig, diags: &mut Vec<Diagnostic>) {
    let mut producible: BTreeSet<Label> = BTreeSet::new();
    producible.insert(0);
    for action in actions_of(cfg) {
        if let Action::SetState(s) = action {
            producible.insert(s.label);
            producible.insert(s.idle_rollback);
            producible.insert(s.hard_rollback);
        }
    }
    for flow in &cfg.flows {
        for cond in &flow.matcher.conditions {
            if cond.field == MatchField::State && !producible.contains(&cond.value) {
                diags.push(Diagnostic::at(
                    node,
                    format!("match on state {} which no set-state produces", cond.value),
                ));
            }
        }
    }
    if cfg.state_table.is_none() {
        let uses_state = cfg
            .flows
            .iter()
            .any(|f| f.matcher.conditions.iter().any(|c| c.field == MatchField::State && c.value != 0))
            || actions_of(cfg).any(|a| matches!(a, Action::SetState(_)));
        if uses_state {
            diags.push(Diagnostic::at(node, "state used without a state table"));
        }
    }
}

fn check_conflicts(node: NodeId, cfg: &SwitchConfig, diags: &mut Vec<Diagnostic>) {
    for (i, a) in cfg.flows.iter().enumerate() {
        for b in cfg.flows.iter().skip(i + 1) {
            if a.matcher == b.matcher && a.actions != b.actions {
                diags.push(Diagnostic::at(
                    node,
                    format!(
                        "conflicting entries at priority {}: identical conditions, different actions",
                        a.matcher.priority
                    ),
                ));
            }
        }
    }
}

/// Follows every pushed tag through the topology until it is popped,
/// dropped, or leaks.
fn check_tag_walks(
    topo: &Topology,
    configs: &BTreeMap<NodeId, SwitchConfig>,
    diags: &mut Vec<Diagnostic>,
) {
    for (&node, cfg) in configs {
        let mut pushes: Vec<(Label, Vec<PortId>)> = Vec::new();
        for flow in &cfg.flows {
            collect_pushes(&flow.actions, cfg, &mut pushes);
        }
        for g in &cfg.groups {
            for b in &g.buckets {
                collect_pushes(&b.actions, cfg, &mut pushes);
            }
        }
        for (tag, ports) in pushes {
            for port in ports {
                walk_tag(topo, configs, node, port, tag, diags);
            }
        }
    }
}

/// Egress ports used by an action list after it pushes `tag`, groups
/// resolved one level deep.
fn collect_pushes(actions: &[Action], cfg: &SwitchConfig, out: &mut Vec<(Label, Vec<PortId>)>) {
    let mut pushed: Option<Label> = None;
    let mut ports = Vec::new();
    for a in actions {
        match a {
            Action::PushTag(l) => pushed = Some(*l),
            Action::Output(p) if pushed.is_some() => ports.push(*p),
            Action::Group(g) if pushed.is_some() => {
                if let Some(group) = cfg.groups.iter().find(|x| x.id == *g) {
                    for b in &group.buckets {
                        for ba in &b.actions {
                            if let Action::Output(p) = ba {
                                ports.push(*p);
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if let Some(l) = pushed {
        if !ports.is_empty() {
            out.push((l, ports));
        }
    }
}

fn walk_tag(
    topo: &Topology,
    configs: &BTreeMap<NodeId, SwitchConfig>,
    from: NodeId,
    port: PortId,
    tag: Label,
    diags: &mut Vec<Diagnostic>,
) {
    let mut visited: BTreeSet<(NodeId, PortId)> = BTreeSet::new();
    let mut frontier: Vec<(NodeId, PortId)> = Vec::new();
    let mut popped_somewhere = false;

    let Some(link) = topo.link_at(from, port) else {
        return; // unlinked port already reported
    };
    frontier.push(topo.link(link).opposite(from));

    while let Some((node, in_port)) = frontier.pop() {
        if !visited.insert((node, in_port)) {
            continue;
        }
        match topo.node_kind(node) {
            Some(NodeKind::Host) => {
                diags.push(Diagnostic::at(
                    node,
                    format!("tag {tag} can reach a host without being popped"),
                ));
                continue;
            }
            Some(NodeKind::Switch) => {}
            None => continue,
        }
        let Some(cfg) = configs.get(&node) else {
            diags.push(Diagnostic::at(node, format!("tag {tag} dead-ends (no config)")));
            continue;
        };
        // Candidate rules: prefer entries that explicitly match the tag
        // (they outrank generic ones in compiled configs); fall back to
        // tag-wildcard entries, which would carry the tag onward.
        let explicit: Vec<_> = cfg
            .flows
            .iter()
            .filter(|f| {
                f.matcher.conditions.iter().any(|c| {
                    c.field == MatchField::Field(crate::pipeline::HeaderField::TagLabel)
                        && c.value == tag
                }) && in_port_compatible(f, in_port)
            })
            .collect();
        let candidates: Vec<_> = if explicit.is_empty() {
            cfg.flows
                .iter()
                .filter(|f| {
                    !f.matcher
                        .conditions
                        .iter()
                        .any(|c| c.field == MatchField::Field(crate::pipeline::HeaderField::TagLabel))
                        && in_port_compatible(f, in_port)
                })
                .collect()
        } else {
            explicit
        };
        if candidates.is_empty() {
            diags.push(Diagnostic::at(
                node,
                format!("tag {tag} arriving on {in_port} matches no rule"),
            ));
            continue;
        }
        for flow in candidates {
            let (pops, ports) = resolve_branch(&flow.actions, cfg);
            if pops {
                popped_somewhere = true;
                continue;
            }
            for p in ports {
                if let Some(l) = topo.link_at(node, p) {
                    frontier.push(topo.link(l).opposite(node));
                }
            }
        }
    }

    if !popped_somewhere {
        diags.push(Diagnostic::at(
            from,
            format!("tag {tag} pushed here is never popped on any path"),
        ));
    }
}

fn in_port_compatible(flow: &crate::pipeline::FlowEntry, in_port: PortId) -> bool {
    flow.matcher.conditions.iter().all(|c| {
        c.field != MatchField::Field(crate::pipeline::HeaderField::InPort)
            || c.value == in_port.0 as u64
    })
}

/// (pops the tag, egress ports when it does not), groups flattened.
fn resolve_branch(actions: &[Action], cfg: &SwitchConfig) -> (bool, Vec<PortId>) {
    let mut ports = Vec::new();
    for a in actions {
        match a {
            Action::PopTag => return (true, Vec::new()),
            Action::Output(p) => ports.push(*p),
            Action::Group(g) => {
                if let Some(group) = cfg.groups.iter().find(|x| x.id == *g) {
                    for b in &group.buckets {
                        for ba in &b.actions {
                            match ba {
                                Action::Output(p) => ports.push(*p),
                                Action::PopTag => return (true, Vec::new()),
                                _ => {}
                            }
                        }
                    }
                }
            }
            _ => {}
        }
    }
    (false, ports)
}
