//! Versioned scenario files: topology, demands with primary/detour paths,
//! intents, traffic generators, controller latency, failure schedule, and
//! seed. Loading gives a [`Scenario`] that compiles into a runnable
//! [`SimSetup`] for either mode.

mod sndlib;

pub use sndlib::{parse_sndlib, SndlibTopology};

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::apps::{self, ConsistencyIntent, ProtectedDemand, ReroutePlan, SelectionKind};
use crate::baseline;
use crate::error::{ConfigError, SimError};
use crate::pipeline::{FieldValue, HeaderField, NodeId, ScopeSpec};
use crate::simnet::{
    ControllerChannel, MetricsLog, SimSetup, Topology, TrafficGen, TrafficKind,
};
use crate::time::{Dur, Time};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Os,
    Of,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Os => f.write_str("os"),
            Mode::Of => f.write_str("of"),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Mode, String> {
        match s {
            "os" => Ok(Mode::Os),
            "of" => Ok(Mode::Of),
            other => Err(format!("unknown mode {other:?} (expected os|of)")),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Consistency,
    Failure,
}

// ---------------------------------------------------------------------
// file schema

const SCHEMA_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    name: String,
    experiment: ExperimentKind,
    seed: u64,
    mode: Mode,
    sim: SimSection,
    controller: ControllerSection,
    topology: TopologySection,
    consistency: Option<ConsistencySection>,
    #[serde(default)]
    demand: Vec<DemandSection>,
    #[serde(default)]
    traffic: Vec<TrafficSection>,
    #[serde(default)]
    failure: Vec<FailureSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimSection {
    until_us: u64,
    #[serde(default)]
    detection_delay_us: u64,
    #[serde(default)]
    switch_latency_us: u64,
    #[serde(default)]
    eager_timeouts: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ControllerSection {
    rtt_us: u64,
    proc_delay_us: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    #[serde(default)]
    switches: Vec<u32>,
    #[serde(default)]
    hosts: Vec<u32>,
    /// [a, b, delay_us] triples; ports are assigned in listing order.
    #[serde(default)]
    links: Vec<(u32, u32, u64)>,
    /// Alternative switch topology source: SNDlib-style listing (nodes
    /// and links sections). Node N of the listing becomes switch id N.
    sndlib_file: Option<String>,
    #[serde(default)]
    sndlib_delay_us: Option<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConsistencySection {
    switch: u32,
    out_neighbors: Vec<u32>,
    lookup_scope: Vec<HeaderField>,
    delta_us: u64,
    selection: String,
    weights: Option<Vec<u32>>,
    destinations: Vec<u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandSection {
    src: u32,
    dst: u32,
    primary: Vec<u32>,
    #[serde(default)]
    plan: Vec<PlanSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanSection {
    failed_link: (u32, u32),
    reroute: u32,
    detour: Vec<u32>,
    delta_us: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrafficSection {
    kind: String,
    src: u32,
    dst: u32,
    rate: u32,
    start_us: u64,
    stop_us: u64,
    flows: Option<u64>,
    pkts_per_flow: Option<u32>,
    pkt_gap_us: Option<u64>,
    jitter_us: Option<u64>,
    #[serde(default)]
    headers: BTreeMap<HeaderField, u64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FailureSection {
    link: (u32, u32),
    down_at_us: u64,
    up_at_us: Option<u64>,
}

// ---------------------------------------------------------------------
// runtime scenario

/// A loaded, resolved scenario. Cheap to clone; sweep drivers clone and
/// override rate, rtt, mode, and seed per cell.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub experiment: ExperimentKind,
    pub mode: Mode,
    pub seed: u64,
    pub until: Time,
    pub detection_delay: Dur,
    pub switch_latency: Dur,
    pub eager_timeouts: bool,
    pub controller: ControllerChannel,
    pub topology: Topology,
    pub consistency: Option<(NodeId, ConsistencyIntent)>,
    pub demands: Vec<ProtectedDemand>,
    pub traffic: Vec<TrafficGen>,
    /// (a, b, up, at) link status schedule.
    pub failures: Vec<(NodeId, NodeId, bool, Time)>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_toml_str(&text, base)
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Scenario, SimError> {
        let file: ScenarioFile =
            toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        if file.version != SCHEMA_VERSION {
            return Err(SimError::Parse(format!(
                "unsupported scenario schema version {} (expected {SCHEMA_VERSION})",
                file.version
            )));
        }
        let mut topology = match &file.topology.sndlib_file {
            Some(rel) => {
                let text = std::fs::read_to_string(base_dir.join(rel))?;
                let delay = Dur(file.topology.sndlib_delay_us.unwrap_or(1000));
                parse_sndlib(&text, delay)?.topology
            }
            None => Topology::new(),
        };
        for &s in &file.topology.switches {
            topology.add_switch(NodeId(s));
        }
        for &h in &file.topology.hosts {
            topology.add_host(NodeId(h));
        }
        for &(a, b, delay) in &file.topology.links {
            topology
                .add_link(NodeId(a), NodeId(b), Dur(delay))
                .map_err(SimError::Config)?;
        }

        let consistency = match file.consistency {
            Some(c) => {
                let switch = NodeId(c.switch);
                let out_ports = c
                    .out_neighbors
                    .iter()
                    .map(|&n| {
                        topology.port_towards(switch, NodeId(n)).ok_or_else(|| {
                            ConfigError::new(format!("switch {switch} has no link to {n}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(SimError::Config)?;
                let selection = match c.selection.as_str() {
                    "random" => SelectionKind::Random,
                    "hash" => SelectionKind::Hash,
                    "round-robin" => SelectionKind::RoundRobin,
                    other => {
                        return Err(SimError::Parse(format!("unknown selection {other:?}")))
                    }
                };
                let intent = ConsistencyIntent {
                    out_ports,
                    lookup_scope: ScopeSpec::new(c.lookup_scope).map_err(SimError::Config)?,
                    delta: Dur(c.delta_us),
                    selection,
                    weights: c.weights,
                    destinations: c.destinations,
                };
                Some((switch, intent))
            }
            None => None,
        };

        let demands = file
            .demand
            .iter()
            .map(|d| {
                let dst = NodeId(d.dst);
                ProtectedDemand {
                    src_host: NodeId(d.src),
                    dst_host: dst,
                    dst_value: d.dst as FieldValue,
                    primary: d.primary.iter().map(|&n| NodeId(n)).collect(),
                    plans: d
                        .plan
                        .iter()
                        .map(|p| ReroutePlan {
                            failed_link: (NodeId(p.failed_link.0), NodeId(p.failed_link.1)),
                            reroute: NodeId(p.reroute),
                            detour: p.detour.iter().map(|&n| NodeId(n)).collect(),
                            delta: Dur(p.delta_us),
                        })
                        .collect(),
                }
            })
            .collect();

        let traffic = file
            .traffic
            .iter()
            .map(|t| {
                let kind = match t.kind.as_str() {
                    "cbr" => TrafficKind::Cbr { rate: t.rate },
                    "tcp-flows" => TrafficKind::TcpFlowArrivals {
                        rate: t.rate,
                        flows: t.flows,
                        pkts_per_flow: t.pkts_per_flow.unwrap_or(1),
                        pkt_gap: Dur(t.pkt_gap_us.unwrap_or(1000)),
                    },
                    other => return Err(SimError::Parse(format!("unknown traffic kind {other:?}"))),
                };
                let mut headers: BTreeMap<HeaderField, u64> = BTreeMap::new();
                headers.insert(HeaderField::EthSrc, t.src as u64);
                headers.insert(HeaderField::EthDst, t.dst as u64);
                headers.insert(HeaderField::IpSrc, t.src as u64);
                headers.insert(HeaderField::IpDst, t.dst as u64);
                headers.insert(HeaderField::IpProto, 6);
                headers.insert(HeaderField::L4Dst, 80);
                if matches!(kind, TrafficKind::Cbr { .. }) {
                    headers.insert(HeaderField::L4Src, 1024);
                }
                for (&f, &v) in &t.headers {
                    headers.insert(f, v);
                }
                Ok(TrafficGen {
                    kind,
                    src: NodeId(t.src),
                    dst: NodeId(t.dst),
                    start: Time(t.start_us),
                    stop: Time(t.stop_us),
                    jitter: t.jitter_us.map(Dur),
                    headers,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut failures = Vec::new();
        for f in &file.failure {
            let (a, b) = (NodeId(f.link.0), NodeId(f.link.1));
            failures.push((a, b, false, Time(f.down_at_us)));
            if let Some(up) = f.up_at_us {
                failures.push((a, b, true, Time(up)));
            }
        }

        Ok(Scenario {
            name: file.name,
            experiment: file.experiment,
            mode: file.mode,
            seed: file.seed,
            until: Time(file.sim.until_us),
            detection_delay: Dur(file.sim.detection_delay_us),
            switch_latency: Dur(file.sim.switch_latency_us),
            eager_timeouts: file.sim.eager_timeouts,
            controller: ControllerChannel::from_rtt(
                Dur(file.controller.rtt_us),
                Dur(file.controller.proc_delay_us),
            ),
            topology,
            consistency,
            demands,
            traffic,
            failures,
        })
    }

    // ----- sweep overrides -------------------------------------------

    pub fn with_mode(mut self, mode: Mode) -> Scenario {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Scenario {
        self.seed = seed;
        self
    }

    pub fn with_rtt(mut self, rtt: Dur) -> Scenario {
        self.controller = ControllerChannel::from_rtt(rtt, self.controller.proc);
        self
    }

    /// Overrides the rate of every generator (the sweep variable).
    pub fn with_rate(mut self, rate: u32) -> Scenario {
        for g in &mut self.traffic {
            g.set_rate(rate);
        }
        self
    }

    pub fn with_traffic_stop(mut self, stop: Time) -> Scenario {
        for g in &mut self.traffic {
            g.stop = stop;
        }
        self
    }

    /// Overrides the flow count of every tcp-flow generator.
    pub fn with_flow_count(mut self, flows: u64) -> Scenario {
        for g in &mut self.traffic {
            if let TrafficKind::TcpFlowArrivals { flows: f, .. } = &mut g.kind {
                *f = Some(flows);
            }
        }
        self
    }

    pub fn with_until(mut self, until: Time) -> Scenario {
        self.until = until;
        self
    }

    /// Drops scheduled repairs, leaving every failure permanent.
    pub fn persistent_failures(mut self) -> Scenario {
        self.failures.retain(|&(_, _, up, _)| !up);
        self
    }

    // ----- compilation -------------------------------------------------

    /// Compiles switch configs for the scenario's mode, validates them,
    /// and packages everything the simulator needs.
    pub fn setup(&self) -> Result<SimSetup, SimError> {
        let mut configs = BTreeMap::new();
        let mut controller = None;
        let mut probe_tags = std::collections::BTreeSet::new();
        let mut lb_switch = None;

        if let Some((switch, intent)) = &self.consistency {
            lb_switch = Some(*switch);
            match self.mode {
                Mode::Os => {
                    configs.insert(*switch, apps::build_consistency(intent)?);
                }
                Mode::Of => {
                    configs.insert(*switch, baseline::build_of_consistency(intent)?);
                    controller = Some(Box::new(baseline::ReactiveConsistencyApp::new(
                        *switch,
                        intent.lookup_scope.clone(),
                        intent.out_ports.clone(),
                        self.seed ^ 0xC0FFEE,
                    ))
                        as Box<dyn crate::simnet::ControllerHandler>);
                }
            }
        }

        if !self.demands.is_empty() {
            match self.mode {
                Mode::Os => {
                    let compiled = apps::build_failure_recovery(&self.topology, &self.demands)?;
                    merge_configs(&mut configs, compiled)?;
                    probe_tags = apps::probe_labels(&self.demands);
                }
                Mode::Of => {
                    if controller.is_some() {
                        return Err(ConfigError::new(
                            "a reactive run supports one controller application; \
                             split the balancer and the protected demands into \
                             separate scenarios",
                        )
                        .into());
                    }
                    let (compiled, app) =
                        baseline::build_of_recovery(&self.topology, &self.demands)?;
                    merge_configs(&mut configs, compiled)?;
                    controller = Some(Box::new(app) as Box<dyn crate::simnet::ControllerHandler>);
                }
            }
        }

        let diags = apps::validate_config(&self.topology, &configs);
        if !diags.is_empty() {
            let msgs: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
            return Err(ConfigError::new(msgs.join("; ")).into());
        }

        Ok(SimSetup {
            name: self.name.clone(),
            topology: self.topology.clone(),
            configs,
            traffic: self.traffic.clone(),
            failures: self.failures.clone(),
            controller: controller.map(|h| (self.controller, h)),
            detection_delay: self.detection_delay,
            switch_latency: self.switch_latency,
            eager_timeouts: self.eager_timeouts,
            probe_tags,
            seed: self.seed,
            lb_switch,
        })
    }

    /// Validates, builds, and runs to the scenario's horizon.
    pub fn run(&self) -> Result<MetricsLog, SimError> {
        crate::simnet::run(self.setup()?, self.until)
    }
}

fn merge_configs(
    into: &mut BTreeMap<NodeId, crate::pipeline::SwitchConfig>,
    from: BTreeMap<NodeId, crate::pipeline::SwitchConfig>,
) -> Result<(), SimError> {
    for (node, cfg) in from {
        if into.contains_key(&node) {
            return Err(ConfigError::new(format!(
                "two intents configure switch {node}; not supported"
            ))
            .into());
        }
        into.insert(node, cfg);
    }
    Ok(())
}
