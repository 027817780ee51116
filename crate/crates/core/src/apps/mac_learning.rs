//! MAC-learning demo built on cross-flow state updates: packets are
//! forwarded by destination address but every packet also refreshes the
//! stored location of its *source* address (lookup scope eth_dst, update
//! scope eth_src).

use crate::error::ConfigError;
use crate::pipeline::{
    Action, Bucket, FlowEntry, GroupKind, HeaderField, Label, Match, MissPolicy, PortId,
    ScopeSpec, SetStateArgs, StateTable, SwitchConfig,
};

/// State label storing "host is on port p" (0 stays DEFAULT = unknown).
pub fn location_label(port: PortId) -> Label {
    port.0 as Label + 1
}

const PRIO_FLOOD: u32 = 10;
const PRIO_KNOWN: u32 = 20;

/// Builds the learning switch over the given ports.
///
/// Unknown destinations flood on every port but the ingress; known ones
/// go straight to the stored port. Set-state labels are static per flow
/// entry, so the rules enumerate (location, ingress) pairs.
pub fn build_mac_learning(ports: &[PortId]) -> Result<SwitchConfig, ConfigError> {
    if ports.len() < 2 {
        return Err(ConfigError::new("mac learning needs at least two ports"));
    }
    let lookup = ScopeSpec::new(vec![HeaderField::EthDst])?;
    let update = ScopeSpec::new(vec![HeaderField::EthSrc])?;
    let state_table = StateTable::new(lookup, update)?;

    let mut builder_groups = Vec::new();
    let mut flows = Vec::new();
    for (qi, &q) in ports.iter().enumerate() {
        let buckets: Vec<Bucket> = ports
            .iter()
            .filter(|&&p| p != q)
            .map(|&p| Bucket::new(vec![Action::Output(p)]))
            .collect();
        let gid = crate::pipeline::GroupId(qi as u32 + 1);
        builder_groups.push(crate::pipeline::GroupEntry::new(gid, GroupKind::All, buckets));
        flows.push(FlowEntry::new(
            Match::any(PRIO_FLOOD)
                .state(0)
                .field(HeaderField::InPort, q.0 as u64),
            vec![
                Action::SetState(SetStateArgs::new(location_label(q))),
                Action::Group(gid),
            ],
        ));
        for &p in ports {
            let actions = if p == q {
                // Destination is where the packet came from: learn, filter.
                vec![Action::SetState(SetStateArgs::new(location_label(q))), Action::Drop]
            } else {
                vec![
                    Action::SetState(SetStateArgs::new(location_label(q))),
                    Action::Output(p),
                ]
            };
            flows.push(FlowEntry::new(
                Match::any(PRIO_KNOWN)
                    .state(location_label(p))
                    .field(HeaderField::InPort, q.0 as u64),
                actions,
            ));
        }
    }

    Ok(SwitchConfig {
        state_table: Some(state_table),
        flows,
        groups: builder_groups,
        miss_policy: Some(MissPolicy::Drop),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{NodeId, Packet, Switch};
    use crate::time::Time;

    fn packet(src: u64, dst: u64, in_port: u32) -> Packet {
        let mut p = Packet::new()
            .with(HeaderField::EthSrc, src)
            .with(HeaderField::EthDst, dst);
        p.ingress_port = PortId(in_port);
        p
    }

    fn switch() -> Switch {
        let ports: Vec<PortId> = (0..4).map(PortId).collect();
        let cfg = build_mac_learning(&ports).unwrap();
        Switch::from_config(NodeId(1), ports, 1, cfg)
    }

    #[test]
    fn unknown_destination_floods_all_other_ports() {
        let mut sw = switch();
        let out = sw.process_packet(packet(0xa, 0xb, 1), Time(0)).unwrap();
        let mut ports: Vec<u32> = out.emissions.iter().map(|(p, _)| p.0).collect();
        ports.sort();
        assert_eq!(ports, vec![0, 2, 3]);
    }

    #[test]
    fn learned_host_gets_unicast() {
        let mut sw = switch();
        // A talks from port 1; the reply to A uses port 1 only.
        sw.process_packet(packet(0xa, 0xb, 1), Time(0)).unwrap();
        let out = sw.process_packet(packet(0xb, 0xa, 3), Time(1)).unwrap();
        assert_eq!(out.emissions.len(), 1);
        assert_eq!(out.emissions[0].0, PortId(1));
    }

    #[test]
    fn host_move_updates_location() {
        // Hand-replayed two-host trace: A on port 1, B on port 3, then A
        // moves to port 2 and traffic to A follows.
        let mut sw = switch();
        sw.process_packet(packet(0xa, 0xb, 1), Time(0)).unwrap();
        sw.process_packet(packet(0xb, 0xa, 3), Time(1)).unwrap();
        sw.process_packet(packet(0xa, 0xb, 2), Time(2)).unwrap();
        let out = sw.process_packet(packet(0xb, 0xa, 3), Time(3)).unwrap();
        assert_eq!(out.emissions.len(), 1);
        assert_eq!(out.emissions[0].0, PortId(2));
    }
}
