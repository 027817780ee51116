//! Deterministic discrete-event simulator: nodes, delayed links, failure
//! injection, traffic generation, and a latency-modeled controller
//! channel. Identical setup and seed give a bit-identical metrics log.

mod controller;
mod engine;
mod event;
mod metrics;
mod topology;
mod traffic;

pub use controller::{ControllerChannel, ControllerHandler, CtrlCmd};
pub use engine::{run, Sim, SimSetup};
pub use metrics::{
    CtrlDirection, CtrlRecord, DropReason, Hop, MetricsLog, PacketKind, PacketRecord,
    PacketStatus, StateLogEntry,
};
pub use topology::{Link, LinkId, NodeKind, Topology};
pub use traffic::{grid_instant, TrafficGen, TrafficKind};
