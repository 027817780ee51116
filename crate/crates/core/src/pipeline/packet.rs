//! Packets and the closed header-field enumeration.
//!
//! Field values are opaque fixed-width integers; the pipeline only ever
//! compares them for equality, so no real protocol parsing happens here.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::time::Time;

/// Identifies a node (switch or host) in a topology.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
pub struct NodeId(pub u32);

/// A port on a switch. Ports are dense small integers assigned per node.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default, Serialize, Deserialize,
)]
pub struct PortId(pub u32);

/// Identifies a group entry within one switch.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct GroupId(pub u32);

/// A state label. Zero is reserved for DEFAULT and is never stored.
pub type Label = u64;

/// An opaque header field value.
pub type FieldValue = u64;

/// Trace identifier carried for metrics only; never matched on.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct FlowId(pub u64);

/// Per-tracked-packet identifier assigned by the simulator.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct PacketUid(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for PortId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}", self.0)
    }
}

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The closed set of fields a scope or match condition may refer to.
///
/// `TagLabel` is the single-level tag slot; `InPort` reads the ingress
/// port from packet metadata. Everything else is an ordinary header.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum HeaderField {
    EthSrc,
    EthDst,
    IpSrc,
    IpDst,
    IpProto,
    L4Src,
    L4Dst,
    TagLabel,
    InPort,
}

impl HeaderField {
    pub const ALL: [HeaderField; 9] = [
        HeaderField::EthSrc,
        HeaderField::EthDst,
        HeaderField::IpSrc,
        HeaderField::IpDst,
        HeaderField::IpProto,
        HeaderField::L4Src,
        HeaderField::L4Dst,
        HeaderField::TagLabel,
        HeaderField::InPort,
    ];

    fn index(self) -> usize {
        match self {
            HeaderField::EthSrc => 0,
            HeaderField::EthDst => 1,
            HeaderField::IpSrc => 2,
            HeaderField::IpDst => 3,
            HeaderField::IpProto => 4,
            HeaderField::L4Src => 5,
            HeaderField::L4Dst => 6,
            HeaderField::TagLabel => 7,
            HeaderField::InPort => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeaderField::EthSrc => "eth_src",
            HeaderField::EthDst => "eth_dst",
            HeaderField::IpSrc => "ip_src",
            HeaderField::IpDst => "ip_dst",
            HeaderField::IpProto => "ip_proto",
            HeaderField::L4Src => "l4_src",
            HeaderField::L4Dst => "l4_dst",
            HeaderField::TagLabel => "tag_label",
            HeaderField::InPort => "in_port",
        }
    }
}

impl fmt::Display for HeaderField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A packet: header values plus simulation metadata. Metadata never
/// participates in matching except the ingress port and the tag.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Packet {
    fields: [Option<FieldValue>; 9],
    pub ingress_port: PortId,
    pub created_at: Time,
    pub flow_id: FlowId,
    pub uid: PacketUid,
}

impl Packet {
    pub fn new() -> Packet {
        Packet {
            fields: [None; 9],
            ingress_port: PortId(0),
            created_at: Time::ZERO,
            flow_id: FlowId(0),
            uid: PacketUid(0),
        }
    }

    /// Builder-style header assignment, mostly for tests and generators.
    pub fn with(mut self, field: HeaderField, value: FieldValue) -> Packet {
        self.set(field, value);
        self
    }

    pub fn get(&self, field: HeaderField) -> Option<FieldValue> {
        match field {
            HeaderField::InPort => Some(self.ingress_port.0 as FieldValue),
            _ => self.fields[field.index()],
        }
    }

    pub fn set(&mut self, field: HeaderField, value: FieldValue) {
        match field {
            HeaderField::InPort => self.ingress_port = PortId(value as u32),
            _ => self.fields[field.index()] = Some(value),
        }
    }

    pub fn tag(&self) -> Option<Label> {
        self.fields[HeaderField::TagLabel.index()]
    }

    /// Single-level tag stack: pushing onto a tagged packet is a
    /// configuration bug and aborts the run.
    pub fn push_tag(&mut self, label: Label) -> Result<(), PipelineError> {
        if self.tag().is_some() {
            return Err(PipelineError::MalformedAction(format!(
                "push_tag({label}) on a packet already tagged {}",
                self.tag().unwrap()
            )));
        }
        self.fields[HeaderField::TagLabel.index()] = Some(label);
        Ok(())
    }

    pub fn pop_tag(&mut self) -> Result<Label, PipelineError> {
        match self.fields[HeaderField::TagLabel.index()].take() {
            Some(l) => Ok(l),
            None => Err(PipelineError::MalformedAction(
                "pop_tag on an untagged packet".into(),
            )),
        }
    }
}

impl Default for Packet {
    fn default() -> Packet {
        Packet::new()
    }
}
