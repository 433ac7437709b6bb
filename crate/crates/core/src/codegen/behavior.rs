//! The event-loop contract a generated runtime follows, as a plain-text
//! document that can be read back and replayed against a trace.
//!
//! ```text
//! runtime Svr
//! start S0
//!
//! S0 receive from P1
//!   await the next frame from P1
//!   on Pos(Point): call handler Pos with the payload, enter S1
//!
//! S1 send
//!   destructure the value into [label, payload, next]
//!   on Draw(Point): send to P2, enter S2
//!
//! S5 terminal
//!   close immediately
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::ast::RoleName;
use crate::efsm::{Efsm, StateId, StateKind};
use crate::verify::Interaction;

pub fn emit_runtime_behavior_spec(efsm: &Efsm) -> String {
    let mut out = String::new();
    writeln!(out, "runtime {}", efsm.role).unwrap();
    writeln!(out, "start {}", efsm.initial).unwrap();
    for (id, kind) in &efsm.states {
        out.push('\n');
        match kind {
            StateKind::Receive { from } => {
                writeln!(out, "{id} receive from {from}").unwrap();
                writeln!(out, "  await the next frame from {from}").unwrap();
                for t in efsm.outgoing(*id) {
                    writeln!(
                        out,
                        "  on {}({}): call handler {} with the payload, enter {}",
                        t.label,
                        t.payloads.join(", "),
                        t.label,
                        t.target
                    )
                    .unwrap();
                }
            }
            StateKind::Send => {
                writeln!(out, "{id} send").unwrap();
                writeln!(out, "  destructure the value into [label, payload, next]").unwrap();
                for t in efsm.outgoing(*id) {
                    writeln!(
                        out,
                        "  on {}({}): send to {}, enter {}",
                        t.label,
                        t.payloads.join(", "),
                        t.partner,
                        t.target
                    )
                    .unwrap();
                }
            }
            StateKind::Terminal => {
                writeln!(out, "{id} terminal").unwrap();
                writeln!(out, "  close immediately").unwrap();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BehaviorStep {
    Receive {
        from: RoleName,
        /// label → successor
        arms: BTreeMap<String, StateId>,
    },
    Send {
        /// label → (partner, successor)
        arms: BTreeMap<String, (RoleName, StateId)>,
    },
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorSpec {
    pub role: RoleName,
    pub start: StateId,
    pub states: BTreeMap<StateId, BehaviorStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("step {index} ({interaction}) is not allowed in state {state}")]
    Rejected {
        index: usize,
        interaction: Interaction,
        state: StateId,
    },
}

fn state_id(s: &str) -> Option<StateId> {
    s.strip_prefix('S')?.parse().ok().map(StateId)
}

pub fn parse_behavior_spec(text: &str) -> Result<BehaviorSpec, BehaviorError> {
    let syntax = |line: usize, message: &str| BehaviorError::Syntax {
        line: line + 1,
        message: message.to_owned(),
    };
    let mut role = None;
    let mut start = None;
    let mut states = BTreeMap::new();
    let mut current: Option<(StateId, BehaviorStep)> = None;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix("  ") {
            let Some((_, step)) = current.as_mut() else {
                return Err(syntax(n, "step outside a state"));
            };
            let Some(arm) = body.strip_prefix("on ") else {
                continue;
            };
            let (head, action) = arm
                .split_once("): ")
                .ok_or_else(|| syntax(n, "malformed arm"))?;
            let label = head.split('(').next().unwrap_or_default().to_owned();
            let target = action
                .rsplit_once("enter ")
                .and_then(|(_, s)| state_id(s))
                .ok_or_else(|| syntax(n, "arm has no successor"))?;
            match step {
                BehaviorStep::Receive { arms, .. } => {
                    arms.insert(label, target);
                }
                BehaviorStep::Send { arms } => {
                    let partner = action
                        .strip_prefix("send to ")
                        .and_then(|s| s.split(',').next())
                        .ok_or_else(|| syntax(n, "send arm has no partner"))?;
                    arms.insert(label, (RoleName::new(partner), target));
                }
                BehaviorStep::Close => return Err(syntax(n, "terminal state has arms")),
            }
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["runtime", r] => role = Some(RoleName::new(*r)),
            ["start", s] => start = Some(state_id(s).ok_or_else(|| syntax(n, "bad state"))?),
            [s, kind, rest @ ..] => {
                let id = state_id(s).ok_or_else(|| syntax(n, "bad state"))?;
                let step = match (*kind, rest) {
                    ("receive", ["from", from]) => BehaviorStep::Receive {
                        from: RoleName::new(*from),
                        arms: BTreeMap::new(),
                    },
                    ("send", []) => BehaviorStep::Send {
                        arms: BTreeMap::new(),
                    },
                    ("terminal", []) => BehaviorStep::Close,
                    _ => return Err(syntax(n, "unknown state kind")),
                };
                if let Some((id, step)) = current.replace((id, step)) {
                    states.insert(id, step);
                }
            }
            _ => return Err(syntax(n, "unrecognized line")),
        }
    }
    if let Some((id, step)) = current {
        states.insert(id, step);
    }
    Ok(BehaviorSpec {
        role: role.ok_or_else(|| syntax(0, "missing `runtime` line"))?,
        start: start.ok_or_else(|| syntax(0, "missing `start` line"))?,
        states,
    })
}

impl BehaviorSpec {
    /// Replays the role's share of a global trace, returning the states
    /// entered. Interactions the role takes no part in are skipped.
    pub fn follow(&self, trace: &[Interaction]) -> Result<Vec<StateId>, BehaviorError> {
        let mut state = self.start;
        let mut visited = vec![state];
        for (index, i) in trace.iter().enumerate() {
            if i.sender != self.role && i.receiver != self.role {
                continue;
            }
            let next = match self.states.get(&state) {
                Some(BehaviorStep::Send { arms }) if i.sender == self.role => arms
                    .get(&i.label)
                    .filter(|(partner, _)| *partner == i.receiver)
                    .map(|(_, t)| *t),
                Some(BehaviorStep::Receive { from, arms })
                    if i.receiver == self.role && *from == i.sender =>
                {
                    arms.get(&i.label).copied()
                }
                _ => None,
            };
            state = next.ok_or_else(|| BehaviorError::Rejected {
                index,
                interaction: i.clone(),
                state,
            })?;
            visited.push(state);
        }
        Ok(visited)
    }
}
