//! Flow entries: prioritized matches (including the synthetic `state`
//! field) with action lists.

use std::fmt;

use crate::pipeline::packet::{FieldValue, GroupId, HeaderField, Label, Packet, PortId};
use crate::pipeline::state::SetStateArgs;

/// What a match condition constrains: a header field or the state label
/// returned by the state stage.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MatchField {
    State,
    Field(HeaderField),
}

/// An exact-value constraint. A field with no condition is wildcarded.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Condition {
    pub field: MatchField,
    pub value: FieldValue,
}

/// A prioritized conjunction of conditions, at most one per field.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Match {
    pub priority: u32,
    pub conditions: Vec<Condition>,
}

impl Match {
    pub fn any(priority: u32) -> Match {
        Match {
            priority,
            conditions: Vec::new(),
        }
    }

    pub fn state(mut self, label: Label) -> Match {
        self.conditions.push(Condition {
            field: MatchField::State,
            value: label,
        });
        self
    }

    pub fn field(mut self, field: HeaderField, value: FieldValue) -> Match {
        self.conditions.push(Condition {
            field: MatchField::Field(field),
            value,
        });
        self
    }

    /// True when every condition holds for (packet, state). A condition on
    /// a field the packet lacks simply fails.
    pub fn matches(&self, packet: &Packet, state: Label) -> bool {
        self.conditions.iter().all(|c| match c.field {
            MatchField::State => state == c.value,
            MatchField::Field(f) => packet.get(f) == Some(c.value),
        })
    }
}

/// One step of an action list. Lists execute left to right.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Action {
    Output(PortId),
    PushTag(Label),
    PopTag,
    SetState(SetStateArgs),
    Group(GroupId),
    /// Ends the action list with no emission.
    Drop,
    ToController,
}

/// A flow-table row.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FlowEntry {
    pub matcher: Match,
    pub actions: Vec<Action>,
}

impl FlowEntry {
    pub fn new(matcher: Match, actions: Vec<Action>) -> FlowEntry {
        FlowEntry { matcher, actions }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            MatchField::State => write!(f, "state={}", self.value),
            MatchField::Field(h) => write!(f, "{}={}", h.name(), self.value),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Output(p) => write!(f, "output({p})"),
            Action::PushTag(l) => write!(f, "push_tag({l})"),
            Action::PopTag => write!(f, "pop_tag"),
            Action::SetState(s) => {
                write!(f, "set_state({}", s.label)?;
                if let Some(d) = s.idle_timeout {
                    write!(f, ",idle={d}")?;
                }
                if let Some(d) = s.hard_timeout {
                    write!(f, ",hard={d}")?;
                }
                if s.idle_rollback != 0 {
                    write!(f, ",idle_rb={}", s.idle_rollback)?;
                }
                if s.hard_rollback != 0 {
                    write!(f, ",hard_rb={}", s.hard_rollback)?;
                }
                write!(f, ")")
            }
            Action::Group(g) => write!(f, "group({g})"),
            Action::Drop => write!(f, "drop"),
            Action::ToController => write!(f, "to_controller"),
        }
    }
}
