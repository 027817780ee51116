//! Group entries: select / all / fast-failover bucket containers.

use std::fmt;

use crate::pipeline::flow::Action;
use crate::pipeline::packet::{GroupId, PortId};
use crate::pipeline::state::ScopeSpec;

/// How a group picks buckets.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum GroupKind {
    /// One bucket drawn uniformly (bucket weights bias the draw) from the
    /// switch rng.
    SelectRandom,
    /// One bucket chosen by a deterministic hash of the configured fields
    /// modulo the bucket count.
    SelectHash(ScopeSpec),
    /// One bucket per packet, cycling a cursor.
    SelectRoundRobin,
    /// Every bucket executes on an independent copy of the packet.
    All,
    /// The first bucket whose watch port is up executes; a final bucket
    /// without a watch port acts as unconditional fallback; with no live
    /// bucket the packet is dropped.
    FastFailover,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Bucket {
    pub watch_port: Option<PortId>,
    pub weight: u32,
    pub actions: Vec<Action>,
}

impl Bucket {
    pub fn new(actions: Vec<Action>) -> Bucket {
        Bucket {
            watch_port: None,
            weight: 1,
            actions,
        }
    }

    pub fn watching(port: PortId, actions: Vec<Action>) -> Bucket {
        Bucket {
            watch_port: Some(port),
            weight: 1,
            actions,
        }
    }

    pub fn weighted(weight: u32, actions: Vec<Action>) -> Bucket {
        Bucket {
            watch_port: None,
            weight,
            actions,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GroupEntry {
    pub id: GroupId,
    pub kind: GroupKind,
    pub buckets: Vec<Bucket>,
    pub(crate) rr_cursor: usize,
}

impl GroupEntry {
    pub fn new(id: GroupId, kind: GroupKind, buckets: Vec<Bucket>) -> GroupEntry {
        GroupEntry {
            id,
            kind,
            buckets,
            rr_cursor: 0,
        }
    }

    pub fn total_weight(&self) -> u64 {
        self.buckets.iter().map(|b| b.weight as u64).sum()
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKind::SelectRandom => write!(f, "select_random"),
            GroupKind::SelectHash(s) => write!(f, "select_hash{s}"),
            GroupKind::SelectRoundRobin => write!(f, "select_rr"),
            GroupKind::All => write!(f, "all"),
            GroupKind::FastFailover => write!(f, "fast_failover"),
        }
    }
}

/// FNV-1a over the key values. Stable across platforms and toolchains so
/// hash-select traces stay byte-identical.
pub(crate) fn stable_hash(values: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_be_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
