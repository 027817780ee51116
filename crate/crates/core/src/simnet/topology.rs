//! Static topology: switches, hosts, and bidirectional delayed links.
//!
//! Ports are assigned automatically per node in link-declaration order, so
//! a scenario only names node pairs and delays. Each (node, port) belongs
//! to at most one link.

use std::collections::BTreeMap;
use std::collections::HashMap;

use crate::error::ConfigError;
use crate::pipeline::{NodeId, PortId};
use crate::time::Dur;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NodeKind {
    Switch,
    Host,
}

/// Index of a link in the topology's link list.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct LinkId(pub usize);

#[derive(Clone, Debug)]
pub struct Link {
    pub a: (NodeId, PortId),
    pub b: (NodeId, PortId),
    pub delay: Dur,
}

impl Link {
    /// The far endpoint as seen from `node`.
    pub fn opposite(&self, node: NodeId) -> (NodeId, PortId) {
        if self.a.0 == node {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Topology {
    nodes: BTreeMap<NodeId, NodeKind>,
    links: Vec<Link>,
    by_port: HashMap<(NodeId, PortId), LinkId>,
    next_port: HashMap<NodeId, u32>,
}

impl Topology {
    pub fn new() -> Topology {
        Topology::default()
    }

    pub fn add_switch(&mut self, id: NodeId) {
        self.nodes.insert(id, NodeKind::Switch);
    }

    pub fn add_host(&mut self, id: NodeId) {
        self.nodes.insert(id, NodeKind::Host);
    }

    pub fn node_kind(&self, id: NodeId) -> Option<NodeKind> {
        self.nodes.get(&id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, NodeKind)> + '_ {
        self.nodes.iter().map(|(&n, &k)| (n, k))
    }

    pub fn switches(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|(_, k)| **k == NodeKind::Switch)
            .map(|(&n, _)| n)
    }

    /// Adds a bidirectional link, allocating the next free port on each
    /// endpoint. Symmetric delay.
    pub fn add_link(&mut self, a: NodeId, b: NodeId, delay: Dur) -> Result<LinkId, ConfigError> {
        for n in [a, b] {
            if !self.nodes.contains_key(&n) {
                return Err(ConfigError::new(format!("link references unknown node {n}")));
            }
        }
        if a == b {
            return Err(ConfigError::new(format!("self-link on node {a}")));
        }
        if self.link_between(a, b).is_some() {
            return Err(ConfigError::new(format!("duplicate link between {a} and {b}")));
        }
        let pa = self.alloc_port(a);
        let pb = self.alloc_port(b);
        let id = LinkId(self.links.len());
        self.links.push(Link {
            a: (a, pa),
            b: (b, pb),
            delay,
        });
        self.by_port.insert((a, pa), id);
        self.by_port.insert((b, pb), id);
        Ok(id)
    }

    fn alloc_port(&mut self, node: NodeId) -> PortId {
        let next = self.next_port.entry(node).or_insert(0);
        let p = PortId(*next);
        *next += 1;
        p
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.0]
    }

    pub fn link_at(&self, node: NodeId, port: PortId) -> Option<LinkId> {
        self.by_port.get(&(node, port)).copied()
    }

    pub fn link_between(&self, a: NodeId, b: NodeId) -> Option<LinkId> {
        self.links
            .iter()
            .position(|l| {
                (l.a.0 == a && l.b.0 == b) || (l.a.0 == b && l.b.0 == a)
            })
            .map(LinkId)
    }

    /// The local port on `from` that leads to neighbor `to`.
    pub fn port_towards(&self, from: NodeId, to: NodeId) -> Option<PortId> {
        let id = self.link_between(from, to)?;
        let l = self.link(id);
        if l.a.0 == from {
            Some(l.a.1)
        } else {
            Some(l.b.1)
        }
    }

    pub fn ports_of(&self, node: NodeId) -> Vec<PortId> {
        let n = self.next_port.get(&node).copied().unwrap_or(0);
        (0..n).map(PortId).collect()
    }

    /// Neighbors of a node in link-declaration order.
    pub fn neighbors(&self, node: NodeId) -> Vec<NodeId> {
        self.links
            .iter()
            .filter_map(|l| {
                if l.a.0 == node {
                    Some(l.b.0)
                } else if l.b.0 == node {
                    Some(l.a.0)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Sum of link delays along a node path. Fails on a missing hop.
    pub fn path_delay(&self, path: &[NodeId]) -> Result<Dur, ConfigError> {
        let mut total = Dur::ZERO;
        for pair in path.windows(2) {
            let id = self
                .link_between(pair[0], pair[1])
                .ok_or_else(|| ConfigError::new(format!("no link between {} and {}", pair[0], pair[1])))?;
            total = total + self.link(id).delay;
        }
        Ok(total)
    }

    /// The single link of a host node, used to inject generated traffic.
    pub fn host_uplink(&self, host: NodeId) -> Result<LinkId, ConfigError> {
        let mut found = None;
        for (i, l) in self.links.iter().enumerate() {
            if l.a.0 == host || l.b.0 == host {
                if found.is_some() {
                    return Err(ConfigError::new(format!("host {host} has more than one link")));
                }
                found = Some(LinkId(i));
            }
        }
        found.ok_or_else(|| ConfigError::new(format!("host {host} has no link")))
    }
}
