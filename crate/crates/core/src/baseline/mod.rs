//! Reactive-controller counterparts used for comparison: consistency by
//! packet-in/flow-mod, and failure recovery by port-status/flow-mod.

mod consistency;
mod recovery;

pub use consistency::{build_of_consistency, ReactiveConsistencyApp};
pub use recovery::{build_of_recovery, ReactiveRecoveryApp};
