//! Forwarding-consistency load balancer.
//!
//! The first packet of a flow (keyed by the lookup scope) dispatches into
//! a select group; the chosen bucket pins the flow by writing a per-port
//! state label with an idle timeout, so every later packet of the flow
//! matches a state rule and leaves on the same port until the flow has
//! been idle for delta. Selection and consistency stay separate: the
//! select kind can change without touching the pinning granularity.

use crate::error::ConfigError;
use crate::pipeline::{
    Action, Bucket, FieldValue, FlowEntry, GroupEntry, GroupId, GroupKind, Label, Match,
    MissPolicy, PortId, ScopeSpec, SetStateArgs, StateTable, SwitchConfig,
};
use crate::pipeline::HeaderField;
use crate::time::Dur;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SelectionKind {
    Random,
    Hash,
    RoundRobin,
}

#[derive(Clone, Debug)]
pub struct ConsistencyIntent {
    /// Egress ports to share load over, in bucket order. At least two.
    pub out_ports: Vec<PortId>,
    /// Granularity of a forwarding decision (also the update scope).
    pub lookup_scope: ScopeSpec,
    /// Lifetime of a decision: idle timeout of the pinning state entry.
    pub delta: Dur,
    pub selection: SelectionKind,
    /// Optional per-port weights, select-random only.
    pub weights: Option<Vec<u32>>,
    /// ip_dst values served by the balancer, one dispatch rule each.
    pub destinations: Vec<FieldValue>,
}

/// State label pinning a flow to the k-th out port (0 stays DEFAULT).
pub fn port_label(bucket_index: usize) -> Label {
    bucket_index as Label + 1
}

const PRIO_DISPATCH: u32 = 10;
const PRIO_PINNED: u32 = 20;

pub fn build_consistency(intent: &ConsistencyIntent) -> Result<SwitchConfig, ConfigError> {
    if intent.out_ports.len() < 2 {
        return Err(ConfigError::new("consistency needs at least two out ports"));
    }
    if intent.delta == Dur::ZERO {
        return Err(ConfigError::new("delta must be positive"));
    }
    if intent.destinations.is_empty() {
        return Err(ConfigError::new("consistency needs at least one destination"));
    }
    if let Some(w) = &intent.weights {
        if intent.selection != SelectionKind::Random {
            return Err(ConfigError::new("weights apply to random selection only"));
        }
        if w.len() != intent.out_ports.len() {
            return Err(ConfigError::new(format!(
                "{} weights for {} ports",
                w.len(),
                intent.out_ports.len()
            )));
        }
        if w.contains(&0) {
            return Err(ConfigError::new("weights must be positive"));
        }
    }

    let state_table = StateTable::new(intent.lookup_scope.clone(), intent.lookup_scope.clone())?;

    let pin = |k: usize| {
        SetStateArgs::new(port_label(k)).idle(intent.delta)
    };
    let buckets: Vec<Bucket> = intent
        .out_ports
        .iter()
        .enumerate()
        .map(|(k, &port)| {
            let actions = vec![Action::SetState(pin(k)), Action::Output(port)];
            match &intent.weights {
                Some(w) => Bucket::weighted(w[k], actions),
                None => Bucket::new(actions),
            }
        })
        .collect();
    let kind = match intent.selection {
        SelectionKind::Random => GroupKind::SelectRandom,
        SelectionKind::Hash => GroupKind::SelectHash(intent.lookup_scope.clone()),
        SelectionKind::RoundRobin => GroupKind::SelectRoundRobin,
    };
    let group = GroupEntry::new(GroupId(1), kind, buckets);

    let mut flows = Vec::new();
    for &dst in &intent.destinations {
        flows.push(FlowEntry::new(
            Match::any(PRIO_DISPATCH)
                .state(0)
                .field(HeaderField::IpDst, dst),
            vec![Action::Group(GroupId(1))],
        ));
        for (k, &port) in intent.out_ports.iter().enumerate() {
            // Refresh the pin and forward.
            flows.push(FlowEntry::new(
                Match::any(PRIO_PINNED)
                    .state(port_label(k))
                    .field(HeaderField::IpDst, dst),
                vec![Action::SetState(pin(k)), Action::Output(port)],
            ));
        }
    }

    Ok(SwitchConfig {
        state_table: Some(state_table),
        flows,
        groups: vec![group],
        miss_policy: Some(MissPolicy::Drop),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{NodeId, Packet, Switch};
    use crate::time::Time;

    fn four_tuple() -> ScopeSpec {
        ScopeSpec::new(vec![
            HeaderField::IpSrc,
            HeaderField::IpDst,
            HeaderField::L4Src,
            HeaderField::L4Dst,
        ])
        .unwrap()
    }

    fn intent() -> ConsistencyIntent {
        ConsistencyIntent {
            out_ports: vec![PortId(1), PortId(2), PortId(3)],
            lookup_scope: four_tuple(),
            delta: Dur::from_secs(10),
            selection: SelectionKind::Random,
            weights: None,
            destinations: vec![500],
        }
    }

    fn flow_packet(l4_src: u64) -> Packet {
        Packet::new()
            .with(HeaderField::IpSrc, 100)
            .with(HeaderField::IpDst, 500)
            .with(HeaderField::L4Src, l4_src)
            .with(HeaderField::L4Dst, 80)
    }

    #[test]
    fn three_ports_one_destination_table_shape() {
        let cfg = build_consistency(&intent()).unwrap();
        // one dispatch + one rule per port, per destination
        assert_eq!(cfg.flows.len(), 4);
        assert_eq!(cfg.groups.len(), 1);
        assert_eq!(cfg.groups[0].buckets.len(), 3);
    }

    #[test]
    fn first_packet_selects_and_pins() {
        let cfg = build_consistency(&intent()).unwrap();
        let mut sw = Switch::from_config(NodeId(1), (0..4).map(PortId), 3, cfg);
        let out = sw.process_packet(flow_packet(4000), Time(0)).unwrap();
        assert_eq!(out.emissions.len(), 1);
        let port = out.emissions[0].0;
        // Subsequent packets follow the pin without touching the group.
        for i in 1..20u64 {
            let out = sw.process_packet(flow_packet(4000), Time(i * 1000)).unwrap();
            assert_eq!(out.emissions.len(), 1);
            assert_eq!(out.emissions[0].0, port);
            assert!(out.matched_state.unwrap() > 0);
        }
    }

    #[test]
    fn idle_flow_gets_fresh_selection_entry() {
        let cfg = build_consistency(&intent()).unwrap();
        let mut sw = Switch::from_config(NodeId(1), (0..4).map(PortId), 3, cfg);
        let t0 = Time(0);
        sw.process_packet(flow_packet(4000), t0).unwrap();
        assert_eq!(sw.state_table().unwrap().len(), 1);
        // Idle 11s > delta: the entry is gone and the next packet
        // dispatches through the group again.
        let out = sw
            .process_packet(flow_packet(4000), Time::from_secs(11))
            .unwrap();
        assert_eq!(out.matched_state, Some(0));
        let selections = out
            .state_changes
            .iter()
            .filter(|c| c.old == 0 && c.new != 0)
            .count();
        assert_eq!(selections, 1);
    }

    #[test]
    fn burst_mode_small_delta_splits_bursts() {
        let mut i = intent();
        i.delta = Dur::from_ms(50);
        let cfg = build_consistency(&i).unwrap();
        let mut sw = Switch::from_config(NodeId(1), (0..4).map(PortId), 9, cfg);
        let mut selections = 0;
        let mut t = Time(0);
        for _burst in 0..10 {
            for _ in 0..5 {
                let out = sw.process_packet(flow_packet(4000), t).unwrap();
                selections += out
                    .state_changes
                    .iter()
                    .filter(|c| c.old == 0 && c.new != 0 && matches!(c.cause, crate::pipeline::StateChangeCause::Set))
                    .count();
                t += Dur(1_000);
            }
            t += Dur::from_ms(250); // 5x delta between bursts
        }
        assert_eq!(selections, 10);
    }

    #[test]
    fn invalid_intents_rejected() {
        let mut i = intent();
        i.out_ports.truncate(1);
        assert!(build_consistency(&i).is_err());

        let mut i = intent();
        i.delta = Dur::ZERO;
        assert!(build_consistency(&i).is_err());

        let mut i = intent();
        i.weights = Some(vec![1, 2]);
        assert!(build_consistency(&i).is_err());
    }
}
