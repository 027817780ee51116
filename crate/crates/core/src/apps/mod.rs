//! Rule compilers: high-level intents in, switch configurations out.

mod consistency;
mod mac_learning;
mod recovery;
mod validate;

pub use consistency::{build_consistency, port_label, ConsistencyIntent, SelectionKind};
pub use mac_learning::{build_mac_learning, location_label};
pub use recovery::{
    build_failure_recovery, probe_labels, ProtectedDemand, ReroutePlan, TagCode, TagKind,
};
pub use validate::{validate_config, Diagnostic};
