//! The stateful switch abstraction: a state table optionally preceding a
//! flow table, plus group tables.
//!
//! A packet is first keyed through the state table (lookup scope) and
//! annotated with a state label, 0 on a miss. The flow table matches on
//! headers plus that label; a set-state action writes back through the
//! update scope, which may differ from the lookup scope (cross-flow
//! updates). Entries carry idle/hard timeouts with optional rollback
//! labels.
//!
//! A switch owns all of its state; distinct switches share nothing, so a
//! driver may process them independently as long as it sequences the
//! events of each one.

mod flow;
mod group;
mod packet;
mod state;
mod switch;

pub use flow::{Action, Condition, FlowEntry, Match, MatchField};
pub use group::{Bucket, GroupEntry, GroupKind};
pub use packet::{
    FieldValue, FlowId, GroupId, HeaderField, Label, NodeId, Packet, PacketUid, PortId,
};
pub use state::{
    expire_entry, extract_key, ExpiryCause, ExpiryOutcome, ExpiryStep, FlowKey, ScopeSpec,
    SetStateArgs, StateChange, StateChangeCause, StateEntry, StateTable,
};
pub use switch::{DropCause, Forwarding, MissPolicy, Switch, SwitchConfig};
