//! Stateful SDN data-plane library with a deterministic discrete-event
//! simulator and traffic-management rule compilers.
//!
//! The crate is organized around five pieces:
//!
//! - [`pipeline`]: the switch abstraction — state table, flow table with a
//!   `state` match field and a set-state action, and select / all /
//!   fast-failover groups.
//! - [`simnet`]: a deterministic event-driven simulator with delayed
//!   links, failure injection, traffic generators, a latency-modeled
//!   controller channel, and per-packet metrics.
//! - [`apps`]: compilers that turn intents into switch configurations —
//!   consistent multipath load balancing, controller-independent failure
//!   recovery with bounce-back tagging and probing, and MAC learning.
//! - [`baseline`]: reactive-controller counterparts of the two apps, used
//!   for comparison runs.
//! - [`scenario`]: the versioned scenario file format plus an SNDlib-style
//!   topology reader.

pub mod apps;
pub mod baseline;
pub mod error;
pub mod pipeline;
pub mod scenario;
pub mod simnet;
pub mod time;

pub use error::{ConfigError, PipelineError, SimError};
pub use time::{Dur, Time};
