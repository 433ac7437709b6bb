//! Endpoint finite state machines.
//!
//! A machine has one state per selection/branching position of a role's
//! local types, plus a single shared terminal state. Machines are kept in
//! canonical form: states are numbered `S0, S1, ...` breadth-first from the
//! initial state, visiting outgoing transitions in label order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write};

use thiserror::Error;

use crate::ast::RoleName;
use crate::local::{Instance, LocalSystem, LocalSystemError, LocalType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StateKind {
    Send,
    Receive { from: RoleName },
    Terminal,
}

impl StateKind {
    pub fn name(&self) -> &'static str {
        match self {
            StateKind::Send => "send",
            StateKind::Receive { .. } => "receive",
            StateKind::Terminal => "terminal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Send,
    Receive,
}

impl Direction {
    pub fn name(self) -> &'static str {
        match self {
            Direction::Send => "send",
            Direction::Receive => "receive",
        }
    }

    fn sigil(self) -> char {
        match self {
            Direction::Send => '!',
            Direction::Receive => '?',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub label: String,
    pub payloads: Vec<String>,
    pub partner: RoleName,
    pub direction: Direction,
    pub target: StateId,
}

impl Transition {
    /// `Partner!label(payloads)` or `Partner?label(payloads)`.
    pub fn action(&self) -> String {
        format!(
            "{}{}{}({})",
            self.partner,
            self.direction.sigil(),
            self.label,
            self.payloads.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Efsm {
    pub role: RoleName,
    pub states: BTreeMap<StateId, StateKind>,
    /// Outgoing transitions; every state has an entry (empty for terminal).
    pub transitions: BTreeMap<StateId, Vec<Transition>>,
    pub initial: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EfsmError {
    #[error(transparent)]
    InvalidSystem(#[from] LocalSystemError),
    #[error("state {0} is not defined")]
    UndefinedState(StateId),
    #[error("state {state} has more than one transition labelled `{label}`")]
    Nondeterministic { state: StateId, label: String },
    #[error("state {0} has transitions that do not match its kind")]
    KindMismatch(StateId),
    #[error("state {0} is unreachable")]
    Unreachable(StateId),
    #[error("more than one terminal state")]
    MultipleTerminals,
}

impl Efsm {
    pub fn outgoing(&self, state: StateId) -> &[Transition] {
        self.transitions
            .get(&state)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn kind(&self, state: StateId) -> &StateKind {
        &self.states[&state]
    }

    pub fn terminal(&self) -> Option<StateId> {
        self.states
            .iter()
            .find(|(_, k)| **k == StateKind::Terminal)
            .map(|(id, _)| *id)
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.values().map(Vec::len).sum()
    }

    /// All labels on any transition, sorted.
    pub fn labels(&self) -> BTreeSet<&str> {
        self.transitions
            .values()
            .flatten()
            .map(|t| t.label.as_str())
            .collect()
    }

    /// Checks determinism, kind consistency, reachability and the
    /// single-terminal rule.
    pub fn validate(&self) -> Result<(), EfsmError> {
        if !self.states.contains_key(&self.initial) {
            return Err(EfsmError::UndefinedState(self.initial));
        }
        let mut terminals = 0;
        for (id, kind) in &self.states {
            let out = self.outgoing(*id);
            let mut labels = BTreeSet::new();
            for t in out {
                if !labels.insert(&t.label) {
                    return Err(EfsmError::Nondeterministic {
                        state: *id,
                        label: t.label.clone(),
                    });
                }
                if !self.states.contains_key(&t.target) {
                    return Err(EfsmError::UndefinedState(t.target));
                }
            }
            let consistent = match kind {
                StateKind::Send => {
                    !out.is_empty() && out.iter().all(|t| t.direction == Direction::Send)
                }
                StateKind::Receive { from } => {
                    !out.is_empty()
                        && out
                            .iter()
                            .all(|t| t.direction == Direction::Receive && &t.partner == from)
                }
                StateKind::Terminal => {
                    terminals += 1;
                    out.is_empty()
                }
            };
            if !consistent {
                return Err(EfsmError::KindMismatch(*id));
            }
        }
        if terminals > 1 {
            return Err(EfsmError::MultipleTerminals);
        }
        let reachable = self.reachable();
        if let Some(id) = self.states.keys().find(|id| !reachable.contains(id)) {
            return Err(EfsmError::Unreachable(*id));
        }
        Ok(())
    }

    fn reachable(&self) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::from([self.initial]);
        let mut queue = VecDeque::from([self.initial]);
        while let Some(s) = queue.pop_front() {
            for t in self.outgoing(s) {
                if seen.insert(t.target) {
                    queue.push_back(t.target);
                }
            }
        }
        seen
    }
}

/// Builds the canonical machine for a role's local system.
pub fn build_efsm(sys: &LocalSystem) -> Result<Efsm, EfsmError> {
    sys.validate()?;
    let mut b = Builder {
        sys,
        states: BTreeMap::new(),
        transitions: BTreeMap::new(),
        roots: BTreeMap::new(),
        terminal: None,
        next: 0,
    };
    let initial = b.instance(&sys.entry)?;
    let efsm = Efsm {
        role: sys.role.clone(),
        states: b.states,
        transitions: b.transitions,
        initial,
    };
    Ok(canonicalize(&efsm))
}

struct Builder<'a> {
    sys: &'a LocalSystem,
    states: BTreeMap<StateId, StateKind>,
    transitions: BTreeMap<StateId, Vec<Transition>>,
    roots: BTreeMap<&'a Instance, StateId>,
    terminal: Option<StateId>,
    next: u32,
}

impl<'a> Builder<'a> {
    fn fresh(&mut self, kind: StateKind) -> StateId {
        let id = StateId(self.next);
        self.next += 1;
        self.states.insert(id, kind);
        self.transitions.insert(id, Vec::new());
        id
    }

    fn terminal(&mut self) -> StateId {
        match self.terminal {
            Some(id) => id,
            None => {
                let id = self.fresh(StateKind::Terminal);
                self.terminal = Some(id);
                id
            }
        }
    }

    /// Root state of an instance, following `Var` aliases to the defining instance.
    fn instance(&mut self, inst: &'a Instance) -> Result<StateId, EfsmError> {
        let mut key = inst;
        let mut def = &self.sys.defs[key];
        while let LocalType::Var(next) = def {
            key = next;
            def = self
                .sys
                .defs
                .get(key)
                .ok_or_else(|| LocalSystemError::Undefined(key.clone()))?;
        }
        if let Some(id) = self.roots.get(key) {
            return Ok(*id);
        }
        let id = match def {
            LocalType::End => self.terminal(),
            LocalType::Select(_) => self.fresh(StateKind::Send),
            LocalType::Branch { from, .. } => self.fresh(StateKind::Receive { from: from.clone() }),
            LocalType::Var(_) => unreachable!(),
        };
        self.roots.insert(key, id);
        self.fill(id, def)?;
        Ok(id)
    }

    fn node(&mut self, t: &'a LocalType) -> Result<StateId, EfsmError> {
        let id = match t {
            LocalType::End => return Ok(self.terminal()),
            LocalType::Var(inst) => return self.instance(inst),
            LocalType::Select(_) => self.fresh(StateKind::Send),
            LocalType::Branch { from, .. } => self.fresh(StateKind::Receive { from: from.clone() }),
        };
        self.fill(id, t)?;
        Ok(id)
    }

    fn fill(&mut self, id: StateId, t: &'a LocalType) -> Result<(), EfsmError> {
        let mut out = Vec::new();
        match t {
            LocalType::Select(arms) => {
                for arm in arms {
                    out.push(Transition {
                        label: arm.label.clone(),
                        payloads: arm.payloads.clone(),
                        partner: arm.to.clone(),
                        direction: Direction::Send,
                        target: self.node(&arm.cont)?,
                    });
                }
            }
            LocalType::Branch { from, arms } => {
                for arm in arms {
                    out.push(Transition {
                        label: arm.label.clone(),
                        payloads: arm.payloads.clone(),
                        partner: from.clone(),
                        direction: Direction::Receive,
                        target: self.node(&arm.cont)?,
                    });
                }
            }
            LocalType::End | LocalType::Var(_) => {}
        }
        self.transitions.insert(id, out);
        Ok(())
    }
}

/// Renumbers states breadth-first from the initial state, visiting
/// transitions in label order, and sorts every transition list by label.
/// Unreachable states are dropped.
pub fn canonicalize(efsm: &Efsm) -> Efsm {
    let mut renumber: BTreeMap<StateId, StateId> = BTreeMap::new();
    let mut order = Vec::new();
    let mut queue = VecDeque::from([efsm.initial]);
    renumber.insert(efsm.initial, StateId(0));
    while let Some(s) = queue.pop_front() {
        order.push(s);
        let mut out: Vec<&Transition> = efsm.outgoing(s).iter().collect();
        out.sort_by(|a, b| a.label.cmp(&b.label));
        for t in out {
            if !renumber.contains_key(&t.target) {
                renumber.insert(t.target, StateId(renumber.len() as u32));
                queue.push_back(t.target);
            }
        }
    }
    let mut states = BTreeMap::new();
    let mut transitions = BTreeMap::new();
    for old in order {
        let new = renumber[&old];
        states.insert(new, efsm.states[&old].clone());
        let mut out: Vec<Transition> = efsm
            .outgoing(old)
            .iter()
            .map(|t| Transition {
                target: renumber[&t.target],
                ..t.clone()
            })
            .collect();
        out.sort_by(|a, b| a.label.cmp(&b.label));
        transitions.insert(new, out);
    }
    Efsm {
        role: efsm.role.clone(),
        states,
        transitions,
        initial: StateId(0),
    }
}

/// Graphviz rendering. Edges read `Partner!label(payloads)` for sends and
/// `Partner?label(payloads)` for receives; the terminal state is double-circled.
pub fn to_dot(efsm: &Efsm) -> String {
    let mut out = String::new();
    writeln!(out, "digraph \"{}\" {{", escape(efsm.role.as_str())).unwrap();
    writeln!(out, "  rankdir=LR;").unwrap();
    for (id, kind) in &efsm.states {
        let shape = match kind {
            StateKind::Terminal => "doublecircle",
            _ => "circle",
        };
        let bold = if *id == efsm.initial {
            ", style=bold"
        } else {
            ""
        };
        writeln!(out, "  {id} [shape={shape}{bold}];").unwrap();
    }
    for (id, out_edges) in &efsm.transitions {
        for t in out_edges {
            writeln!(
                out,
                "  {id} -> {} [label=\"{}\"];",
                t.target,
                escape(&t.action())
            )
            .unwrap();
        }
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

impl fmt::Display for Efsm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "role {}, initial {}", self.role, self.initial)?;
        for (id, kind) in &self.states {
            match kind {
                StateKind::Receive { from } => writeln!(f, "{id} receive from {from}")?,
                k => writeln!(f, "{id} {}", k.name())?,
            }
            for t in self.outgoing(*id) {
                writeln!(f, "  {} -> {}", t.action(), t.target)?;
            }
        }
        Ok(())
    }
}
