//! Consistency by controller: the switch punts the first packet of every
//! unknown flow; the controller picks a port at random, installs a
//! higher-priority pinning entry for the flow key, and forwards the held
//! packet on the chosen port.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::apps::ConsistencyIntent;
use crate::error::ConfigError;
use crate::pipeline::{
    extract_key, Action, FlowEntry, FlowKey, HeaderField, Match, MatchField, MissPolicy, NodeId,
    Packet, PortId, ScopeSpec, SwitchConfig,
};
use crate::simnet::{ControllerHandler, CtrlCmd};
use crate::time::Time;

const PRIO_DISPATCH: u32 = 1;
const PRIO_PIN: u32 = 100;

/// Switch side: one punt rule per destination; no state table, no groups.
pub fn build_of_consistency(intent: &ConsistencyIntent) -> Result<SwitchConfig, ConfigError> {
    if intent.out_ports.len() < 2 {
        return Err(ConfigError::new("consistency needs at least two out ports"));
    }
    if intent.destinations.is_empty() {
        return Err(ConfigError::new("consistency needs at least one destination"));
    }
    let flows = intent
        .destinations
        .iter()
        .map(|&dst| {
            FlowEntry::new(
                Match::any(PRIO_DISPATCH).field(HeaderField::IpDst, dst),
                vec![Action::ToController],
            )
        })
        .collect();
    Ok(SwitchConfig {
        state_table: None,
        flows,
        groups: Vec::new(),
        miss_policy: Some(MissPolicy::ToController),
    })
}

/// Controller side of the reactive load balancer.
pub struct ReactiveConsistencyApp {
    switch: NodeId,
    scope: ScopeSpec,
    out_ports: Vec<PortId>,
    pinned: HashMap<FlowKey, PortId>,
    rng: ChaCha8Rng,
}

impl ReactiveConsistencyApp {
    pub fn new(switch: NodeId, scope: ScopeSpec, out_ports: Vec<PortId>, seed: u64) -> Self {
        ReactiveConsistencyApp {
            switch,
            scope,
            out_ports,
            pinned: HashMap::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pinned_flows(&self) -> usize {
        self.pinned.len()
    }

    fn pin_entry(&self, key: &FlowKey, port: PortId) -> FlowEntry {
        let mut m = Match::any(PRIO_PIN);
        for (field, value) in self.scope.fields().iter().zip(&key.0) {
            m = m.field(*field, *value);
        }
        debug_assert!(m.conditions.iter().all(|c| c.field != MatchField::State));
        FlowEntry::new(m, vec![Action::Output(port)])
    }
}

impl ControllerHandler for ReactiveConsistencyApp {
    fn on_packet_in(&mut self, switch: NodeId, packet: &Packet, _now: Time) -> Vec<CtrlCmd> {
        if switch != self.switch {
            return Vec::new();
        }
        let Ok(key) = extract_key(packet, &self.scope) else {
            return Vec::new();
        };
        match self.pinned.get(&key) {
            Some(&port) => {
                // A packet of this flow raced the flow-mod: forward it on
                // the already-chosen port, no second pinning entry.
                vec![CtrlCmd::PacketOut {
                    switch,
                    port,
                    packet: packet.clone(),
                }]
            }
            None => {
                let port = self.out_ports[self.rng.gen_range(0..self.out_ports.len())];
                self.pinned.insert(key.clone(), port);
                vec![
                    CtrlCmd::InstallFlow {
                        switch,
                        entry: self.pin_entry(&key, port),
                    },
                    CtrlCmd::PacketOut {
                        switch,
                        port,
                        packet: packet.clone(),
                    },
                ]
            }
        }
    }

    fn on_port_status(&mut self, _: NodeId, _: PortId, _: bool, _: Time) -> Vec<CtrlCmd> {
        Vec::new()
    }
}
