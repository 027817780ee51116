//! The state table: an exact-match key/value stage that maps flow keys to
//! state labels, with idle/hard timeouts and optional rollback labels.
//!
//! Timeouts are evaluated lazily against the stored timestamps. Expiry is
//! replayed as a chain: rollbacks are applied *at the instant the timeout
//! elapsed* (re-arming both configured timeouts from that instant), then
//! the chain continues until no timeout elapses before `now`. This makes
//! lazy evaluation observationally identical to firing a timer at every
//! expiry instant, which the simulator's optional eager path relies on.

use std::collections::HashMap;
use std::fmt;

use crate::error::{ConfigError, PipelineError};
use crate::pipeline::packet::{FieldValue, HeaderField, Label, Packet};
use crate::time::{Dur, Time};

/// An ordered, non-empty list of header fields defining a flow key.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ScopeSpec {
    fields: Vec<HeaderField>,
}

impl ScopeSpec {
    pub fn new(fields: Vec<HeaderField>) -> Result<ScopeSpec, ConfigError> {
        if fields.is_empty() {
            return Err(ConfigError::new("scope must name at least one field"));
        }
        Ok(ScopeSpec { fields })
    }

    pub fn fields(&self) -> &[HeaderField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }
}

impl fmt::Display for ScopeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.fields.iter().map(|h| h.name()).collect();
        write!(f, "[{}]", names.join(","))
    }
}

/// Concrete field values, positionally aligned with the scope that
/// produced them.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct FlowKey(pub Vec<FieldValue>);

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vals: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", vals.join(","))
    }
}

/// Projects the scoped fields out of a packet.
///
/// Deterministic and pure; fails if any scoped field is absent (the tag
/// counts as present only when set).
pub fn extract_key(packet: &Packet, scope: &ScopeSpec) -> Result<FlowKey, PipelineError> {
    let mut values = Vec::with_capacity(scope.len());
    for &field in scope.fields() {
        match packet.get(field) {
            Some(v) => values.push(v),
            None => return Err(PipelineError::MissingField(field)),
        }
    }
    Ok(FlowKey(values))
}

/// Arguments of a set-state action.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SetStateArgs {
    pub label: Label,
    pub idle_timeout: Option<Dur>,
    pub hard_timeout: Option<Dur>,
    pub idle_rollback: Label,
    pub hard_rollback: Label,
}

impl SetStateArgs {
    pub fn new(label: Label) -> SetStateArgs {
        SetStateArgs {
            label,
            idle_timeout: None,
            hard_timeout: None,
            idle_rollback: 0,
            hard_rollback: 0,
        }
    }

    pub fn idle(mut self, timeout: Dur) -> SetStateArgs {
        self.idle_timeout = Some(timeout);
        self
    }

    pub fn hard(mut self, timeout: Dur) -> SetStateArgs {
        self.hard_timeout = Some(timeout);
        self
    }

    pub fn idle_rollback(mut self, label: Label) -> SetStateArgs {
        self.idle_rollback = label;
        self
    }

    pub fn hard_rollback(mut self, label: Label) -> SetStateArgs {
        self.hard_rollback = label;
        self
    }
}

/// A stored state entry. Entries with label 0 are never stored; a miss
/// already means DEFAULT.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateEntry {
    pub label: Label,
    pub idle_timeout: Option<Dur>,
    pub hard_timeout: Option<Dur>,
    pub idle_rollback: Label,
    pub hard_rollback: Label,
    pub installed_at: Time,
    pub last_hit: Time,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExpiryCause {
    Idle,
    Hard,
}

/// Net outcome of replaying an entry's timeouts up to `now`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ExpiryOutcome {
    /// No timeout elapsed.
    Kept,
    /// At least one rollback fired; the entry survives with this label.
    Replaced(Label),
    /// A timeout with rollback label 0 fired; the entry is gone.
    Deleted,
}

/// One label transition applied during expiry replay.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ExpiryStep {
    pub at: Time,
    pub from: Label,
    pub to: Label, // 0 means deleted
    pub cause: ExpiryCause,
}

/// Replays every timeout that elapsed by `now`, mutating the entry in
/// place and appending one step per label transition.
///
/// Hard timeouts are checked against `installed_at`, idle against
/// `last_hit`; when both elapse at the same instant the hard rollback
/// wins. A non-zero rollback re-arms both configured timeouts from the
/// expiry instant; rollback label 0 deletes.
pub fn expire_entry(entry: &mut StateEntry, now: Time, steps: &mut Vec<ExpiryStep>) -> ExpiryOutcome {
    let mut fired = false;
    loop {
        let idle_at = entry.idle_timeout.map(|d| entry.last_hit + d);
        let hard_at = entry.hard_timeout.map(|d| entry.installed_at + d);
        let next = match (idle_at, hard_at) {
            (None, None) => break,
            (Some(i), None) => i,
            (None, Some(h)) => h,
            (Some(i), Some(h)) => i.min(h),
        };
        if next > now {
            break;
        }
        // Hard takes precedence on a tie.
        let cause = if hard_at == Some(next) {
            ExpiryCause::Hard
        } else {
            ExpiryCause::Idle
        };
        let rollback = match cause {
            ExpiryCause::Idle => entry.idle_rollback,
            ExpiryCause::Hard => entry.hard_rollback,
        };
        if entry.label != rollback {
            steps.push(ExpiryStep {
                at: next,
                from: entry.label,
                to: rollback,
                cause,
            });
        }
        if rollback == 0 {
            return ExpiryOutcome::Deleted;
        }
        entry.label = rollback;
        entry.installed_at = next;
        entry.last_hit = next;
        fired = true;
    }
    if fired {
        ExpiryOutcome::Replaced(entry.label)
    } else {
        ExpiryOutcome::Kept
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StateChangeCause {
    Set,
    IdleTimeout,
    HardTimeout,
}

impl StateChangeCause {
    pub fn short_name(self) -> &'static str {
        match self {
            StateChangeCause::Set => "set",
            StateChangeCause::IdleTimeout => "idle",
            StateChangeCause::HardTimeout => "hard",
        }
    }
}

impl From<ExpiryCause> for StateChangeCause {
    fn from(c: ExpiryCause) -> StateChangeCause {
        match c {
            ExpiryCause::Idle => StateChangeCause::IdleTimeout,
            ExpiryCause::Hard => StateChangeCause::HardTimeout,
        }
    }
}

/// One observable label transition in a state table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct StateChange {
    pub at: Time,
    pub key: FlowKey,
    pub old: Label,
    pub new: Label,
    pub cause: StateChangeCause,
}

/// The keyed state stage preceding a flow table.
#[derive(Clone, Debug)]
pub struct StateTable {
    lookup_scope: ScopeSpec,
    update_scope: ScopeSpec,
    entries: HashMap<FlowKey, StateEntry>,
}

impl StateTable {
    /// Scopes must have equal arity so keys produced by either are valid
    /// keys of the same table (this is what makes cross-flow updates,
    /// `lookup_scope != update_scope`, well formed).
    pub fn new(lookup_scope: ScopeSpec, update_scope: ScopeSpec) -> Result<StateTable, ConfigError> {
        if lookup_scope.len() != update_scope.len() {
            return Err(ConfigError::new(format!(
                "lookup scope {lookup_scope} and update scope {update_scope} have different arity"
            )));
        }
        Ok(StateTable {
            lookup_scope,
            update_scope,
            entries: HashMap::new(),
        })
    }

    pub fn lookup_scope(&self) -> &ScopeSpec {
        &self.lookup_scope
    }

    pub fn update_scope(&self) -> &ScopeSpec {
        &self.update_scope
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &FlowKey) -> Option<&StateEntry> {
        self.entries.get(key)
    }

    /// Returns the packet's state label, expiring the matched entry first
    /// if a timeout elapsed. A miss returns 0 (DEFAULT). A hit refreshes
    /// the idle timer.
    pub fn lookup(
        &mut self,
        packet: &Packet,
        now: Time,
        changes: &mut Vec<StateChange>,
    ) -> Result<Label, PipelineError> {
        let key = extract_key(packet, &self.lookup_scope)?;
        Ok(self.lookup_key(key, now, changes))
    }

    fn lookup_key(&mut self, key: FlowKey, now: Time, changes: &mut Vec<StateChange>) -> Label {
        let mut steps = Vec::new();
        let label = match self.entries.get_mut(&key) {
            None => return 0,
            Some(entry) => match expire_entry(entry, now, &mut steps) {
                ExpiryOutcome::Deleted => None,
                ExpiryOutcome::Kept | ExpiryOutcome::Replaced(_) => {
                    entry.last_hit = now;
                    Some(entry.label)
                }
            },
        };
        let label = match label {
            Some(l) => l,
            None => {
                self.entries.remove(&key);
                0
            }
        };
        record_steps(&key, steps, changes);
        label
    }

    /// Applies a set-state action using the update scope. Label 0 removes
    /// the entry; anything else installs/overwrites it with timeouts and
    /// rollbacks from the action, both timestamps set to `now`. The write
    /// is visible to the very next lookup.
    pub fn apply_set(
        &mut self,
        packet: &Packet,
        args: &SetStateArgs,
        now: Time,
        changes: &mut Vec<StateChange>,
    ) -> Result<(), PipelineError> {
        let key = extract_key(packet, &self.update_scope)?;
        // Replay pending expiries first so the logged old label is the one
        // an observer at `now` would have seen.
        let mut steps = Vec::new();
        let old = match self.entries.get_mut(&key) {
            Some(entry) => match expire_entry(entry, now, &mut steps) {
                ExpiryOutcome::Deleted => None,
                _ => Some(entry.label),
            },
            None => Some(0),
        };
        let old = match old {
            Some(l) => l,
            None => {
                self.entries.remove(&key);
                0
            }
        };
        record_steps(&key, steps, changes);
        if args.label == 0 {
            if self.entries.remove(&key).is_some() {
                changes.push(StateChange {
                    at: now,
                    key,
                    old,
                    new: 0,
                    cause: StateChangeCause::Set,
                });
            }
            return Ok(());
        }
        self.entries.insert(
            key.clone(),
            StateEntry {
                label: args.label,
                idle_timeout: args.idle_timeout,
                hard_timeout: args.hard_timeout,
                idle_rollback: args.idle_rollback,
                hard_rollback: args.hard_rollback,
                installed_at: now,
                last_hit: now,
            },
        );
        changes.push(StateChange {
            at: now,
            key,
            old,
            new: args.label,
            cause: StateChangeCause::Set,
        });
        Ok(())
    }

    /// Eager-path sweep: replays timeouts for every entry without
    /// refreshing anything. Keys are processed in sorted order so the
    /// change log is deterministic.
    pub fn sweep(&mut self, now: Time, changes: &mut Vec<StateChange>) {
        let mut keys: Vec<FlowKey> = self.entries.keys().cloned().collect();
        keys.sort();
        for key in keys {
            let entry = self.entries.get_mut(&key).expect("key just listed");
            let mut steps = Vec::new();
            if let ExpiryOutcome::Deleted = expire_entry(entry, now, &mut steps) {
                self.entries.remove(&key);
            }
            record_steps(&key, steps, changes);
        }
    }

    /// Earliest instant at which any entry has a timeout due, for eager
    /// timer scheduling.
    pub fn next_expiry(&self) -> Option<Time> {
        self.entries
            .values()
            .filter_map(|e| {
                let idle = e.idle_timeout.map(|d| e.last_hit + d);
                let hard = e.hard_timeout.map(|d| e.installed_at + d);
                match (idle, hard) {
                    (None, None) => None,
                    (Some(i), None) => Some(i),
                    (None, Some(h)) => Some(h),
                    (Some(i), Some(h)) => Some(i.min(h)),
                }
            })
            .min()
    }

    /// Entries sorted by key, for dumps and tests.
    pub fn iter_sorted(&self) -> Vec<(&FlowKey, &StateEntry)> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }
}

fn record_steps(key: &FlowKey, steps: Vec<ExpiryStep>, changes: &mut Vec<StateChange>) {
    for s in steps {
        changes.push(StateChange {
            at: s.at,
            key: key.clone(),
            old: s.from,
            new: s.to,
            cause: s.cause.into(),
        });
    }
}
