//! The reroute-node state machine exercised directly at the pipeline
//! level, one transition at a time.

use openstate::apps::{build_failure_recovery, ProtectedDemand, ReroutePlan, TagCode, TagKind};
use openstate::pipeline::{FlowKey, HeaderField, NodeId, Packet, PortId, Switch};
use openstate::simnet::Topology;
use openstate::time::{Dur, Time};

// host 100 - 1 - 2 - 3 - 4 - host 200, detour 1-5-6-3 protecting link
// (2,3); reroute 1, detect 2, element 3, rejoin 3.
fn topo() -> Topology {
    let mut t = Topology::new();
    for n in 1..=6 {
        t.add_switch(NodeId(n));
    }
    t.add_host(NodeId(100));
    t.add_host(NodeId(200));
    t.add_link(NodeId(100), NodeId(1), Dur(100)).unwrap();
    t.add_link(NodeId(1), NodeId(2), Dur(100)).unwrap();
    t.add_link(NodeId(2), NodeId(3), Dur(100)).unwrap();
    t.add_link(NodeId(3), NodeId(4), Dur(100)).unwrap();
    t.add_link(NodeId(4), NodeId(200), Dur(100)).unwrap();
    t.add_link(NodeId(1), NodeId(5), Dur(100)).unwrap();
    t.add_link(NodeId(5), NodeId(6), Dur(100)).unwrap();
    t.add_link(NodeId(6), NodeId(3), Dur(100)).unwrap();
    t
}

fn demand() -> ProtectedDemand {
    ProtectedDemand {
        src_host: NodeId(100),
        dst_host: NodeId(200),
        dst_value: 200,
        primary: vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)],
        plans: vec![ReroutePlan {
            failed_link: (NodeId(2), NodeId(3)),
            reroute: NodeId(1),
            detour: vec![NodeId(1), NodeId(5), NodeId(6), NodeId(3)],
            delta: Dur::from_secs(1),
        }],
    }
}

fn reroute_switch() -> (Switch, PortId, PortId, PortId) {
    let topo = topo();
    let mut configs = build_failure_recovery(&topo, &[demand()]).unwrap();
    let cfg = configs.remove(&NodeId(1)).unwrap();
    let sw = Switch::from_config(NodeId(1), topo.ports_of(NodeId(1)), 5, cfg);
    let to_primary = topo.port_towards(NodeId(1), NodeId(2)).unwrap();
    let to_detour = topo.port_towards(NodeId(1), NodeId(5)).unwrap();
    let from_host = topo.port_towards(NodeId(1), NodeId(100)).unwrap();
    (sw, to_primary, to_detour, from_host)
}

fn data_packet(in_port: PortId) -> Packet {
    let mut p = Packet::new()
        .with(HeaderField::IpSrc, 100)
        .with(HeaderField::IpDst, 200)
        .with(HeaderField::IpProto, 6)
        .with(HeaderField::L4Src, 1024)
        .with(HeaderField::L4Dst, 80);
    p.ingress_port = in_port;
    p
}

const F: u64 = 2 * 3; // failure tag for element 3
const P: u64 = 2 * 3 + 1;

#[test]
fn tag_codes_match_scheme() {
    assert_eq!(TagCode::encode(TagKind::Failure, NodeId(3)), F);
    assert_eq!(TagCode::encode(TagKind::Probe, NodeId(3)), P);
}

#[test]
fn state0_untagged_goes_primary() {
    let (mut sw, to_primary, _, from_host) = reroute_switch();
    let out = sw.process_packet(data_packet(from_host), Time(0)).unwrap();
    assert_eq!(out.matched_state, Some(0));
    assert_eq!(out.emissions.len(), 1);
    assert_eq!(out.emissions[0].0, to_primary);
    assert!(out.emissions[0].1.tag().is_none());
}

#[test]
fn bounced_packet_enters_f_and_takes_detour_tag_kept() {
    let (mut sw, to_primary, to_detour, _) = reroute_switch();
    let mut bounced = data_packet(to_primary); // comes back from node 2
    bounced.push_tag(F).unwrap();
    let out = sw.process_packet(bounced, Time(10)).unwrap();
    assert_eq!(out.emissions.len(), 1);
    assert_eq!(out.emissions[0].0, to_detour);
    assert_eq!(out.emissions[0].1.tag(), Some(F));
    let entry = sw.state_table().unwrap().get(&FlowKey(vec![200])).unwrap();
    assert_eq!(entry.label, F);
    assert_eq!(entry.hard_timeout, Some(Dur::from_secs(1)));
    assert_eq!(entry.hard_rollback, P);
}

#[test]
fn state_f_fresh_packet_gets_tag_pushed() {
    let (mut sw, to_primary, to_detour, from_host) = reroute_switch();
    let mut bounced = data_packet(to_primary);
    bounced.push_tag(F).unwrap();
    sw.process_packet(bounced, Time(10)).unwrap();

    let out = sw.process_packet(data_packet(from_host), Time(20)).unwrap();
    assert_eq!(out.matched_state, Some(F));
    assert_eq!(out.emissions.len(), 1);
    assert_eq!(out.emissions[0].0, to_detour);
    assert_eq!(out.emissions[0].1.tag(), Some(F));
}

#[test]
fn hard_timeout_moves_to_p_and_next_packet_probes() {
    let (mut sw, to_primary, to_detour, from_host) = reroute_switch();
    let mut bounced = data_packet(to_primary);
    bounced.push_tag(F).unwrap();
    sw.process_packet(bounced, Time(0)).unwrap();

    // One delta later the entry has rolled back to P; the next data
    // packet is served once: duplicated into a tagged detour copy and a
    // probe on the primary, and the state re-arms to F.
    let now = Time(1_000_001);
    let out = sw.process_packet(data_packet(from_host), now).unwrap();
    assert_eq!(out.matched_state, Some(P));
    assert_eq!(out.emissions.len(), 2);
    assert_eq!(out.emissions[0].0, to_detour);
    assert_eq!(out.emissions[0].1.tag(), Some(F));
    assert_eq!(out.emissions[1].0, to_primary);
    assert_eq!(out.emissions[1].1.tag(), Some(P));
    let entry = sw.state_table().unwrap().get(&FlowKey(vec![200])).unwrap();
    assert_eq!(entry.label, F);
    assert_eq!(entry.installed_at, now);
}

#[test]
fn returning_probe_restores_default_and_primary() {
    let (mut sw, to_primary, _, from_host) = reroute_switch();
    let mut bounced = data_packet(to_primary);
    bounced.push_tag(F).unwrap();
    sw.process_packet(bounced, Time(0)).unwrap();

    let mut probe = data_packet(to_primary); // returns from node 2
    probe.push_tag(P).unwrap();
    let out = sw.process_packet(probe, Time(500)).unwrap();
    assert_eq!(out.emissions.len(), 1);
    assert_eq!(out.emissions[0].0, to_primary);
    assert_eq!(out.emissions[0].1.tag(), None, "tag popped on restore");
    assert!(sw.state_table().unwrap().get(&FlowKey(vec![200])).is_none());

    // Follow-up traffic is back on the primary path, untagged.
    let out = sw.process_packet(data_packet(from_host), Time(600)).unwrap();
    assert_eq!(out.matched_state, Some(0));
    assert_eq!(out.emissions[0].0, to_primary);
    assert!(out.emissions[0].1.tag().is_none());
}

#[test]
fn bounced_packet_while_already_in_f_keeps_tag_no_double_push() {
    let (mut sw, to_primary, to_detour, _) = reroute_switch();
    for t in [0u64, 5, 10] {
        let mut bounced = data_packet(to_primary);
        bounced.push_tag(F).unwrap();
        let out = sw.process_packet(bounced, Time(t)).unwrap();
        assert_eq!(out.emissions.len(), 1);
        assert_eq!(out.emissions[0].0, to_detour);
        assert_eq!(out.emissions[0].1.tag(), Some(F));
    }
}
