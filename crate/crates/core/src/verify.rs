//! Synchronous product of endpoint machines, safety checking, and bounded
//! trace enumeration for both global protocols and products.
//!
//! Two roles interact only by rendezvous: a send transition of one machine
//! fires together with a matching receive transition of its partner.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::ast::{GStatement, Module, RoleName};
use crate::efsm::{Direction, Efsm, StateId, StateKind};
use crate::local::Instance;
use crate::project::substitution;

/// One state per machine, in the order the machines were composed.
pub type Config = Vec<StateId>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    pub sender: RoleName,
    pub receiver: RoleName,
    pub label: String,
}

impl Interaction {
    pub fn new(
        sender: impl Into<RoleName>,
        receiver: impl Into<RoleName>,
        label: impl Into<String>,
    ) -> Self {
        Interaction {
            sender: sender.into(),
            receiver: receiver.into(),
            label: label.into(),
        }
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}:{}", self.sender, self.receiver, self.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub interaction: Interaction,
    pub target: Config,
}

#[derive(Debug, Clone)]
pub struct ProductGraph {
    pub roles: Vec<RoleName>,
    pub efsms: Vec<Efsm>,
    pub initial: Config,
    /// Every reachable configuration with its outgoing edges, sorted by
    /// (sender, receiver, label).
    pub edges: BTreeMap<Config, Vec<Edge>>,
}

impl ProductGraph {
    pub fn configs(&self) -> impl Iterator<Item = &Config> {
        self.edges.keys()
    }

    pub fn config_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(Vec::len).sum()
    }

    pub fn outgoing(&self, config: &Config) -> &[Edge] {
        self.edges.get(config).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_final(&self, config: &Config) -> bool {
        config
            .iter()
            .zip(&self.efsms)
            .all(|(s, m)| *m.kind(*s) == StateKind::Terminal)
    }

    /// Renders a configuration as `(S0, S3, S1)`.
    pub fn show(config: &Config) -> String {
        let parts: Vec<String> = config.iter().map(ToString::to_string).collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("product exceeds {limit} configurations")]
    StateSpaceExceeded { limit: usize },
    #[error("role `{0}` has more than one machine")]
    DuplicateRole(RoleName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComposeOptions {
    pub max_configs: usize,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            max_configs: 1_000_000,
        }
    }
}

pub fn compose(efsms: &[Efsm]) -> Result<ProductGraph, ComposeError> {
    compose_with(efsms, ComposeOptions::default())
}

/// Explores every configuration reachable from the all-initial one.
pub fn compose_with(efsms: &[Efsm], opts: ComposeOptions) -> Result<ProductGraph, ComposeError> {
    let roles: Vec<RoleName> = efsms.iter().map(|m| m.role.clone()).collect();
    let mut index = BTreeMap::new();
    for (i, r) in roles.iter().enumerate() {
        if index.insert(r.clone(), i).is_some() {
            return Err(ComposeError::DuplicateRole(r.clone()));
        }
    }
    let initial: Config = efsms.iter().map(|m| m.initial).collect();
    let mut edges = BTreeMap::new();
    let mut queue = VecDeque::from([initial.clone()]);
    let mut seen = BTreeSet::from([initial.clone()]);
    while let Some(config) = queue.pop_front() {
        let out = successors(efsms, &index, &config);
        for e in &out {
            if seen.insert(e.target.clone()) {
                if seen.len() > opts.max_configs {
                    return Err(ComposeError::StateSpaceExceeded {
                        limit: opts.max_configs,
                    });
                }
                queue.push_back(e.target.clone());
            }
        }
        edges.insert(config, out);
    }
    Ok(ProductGraph {
        roles,
        efsms: efsms.to_vec(),
        initial,
        edges,
    })
}

fn successors(efsms: &[Efsm], index: &BTreeMap<RoleName, usize>, config: &Config) -> Vec<Edge> {
    let mut out = Vec::new();
    for (i, m) in efsms.iter().enumerate() {
        for t in m.outgoing(config[i]) {
            if t.direction != Direction::Send {
                continue;
            }
            let Some(&j) = index.get(&t.partner) else {
                continue;
            };
            let matching = efsms[j].outgoing(config[j]).iter().find(|r| {
                r.direction == Direction::Receive && r.partner == m.role && r.label == t.label
            });
            if let Some(r) = matching {
                let mut target = config.clone();
                target[i] = t.target;
                target[j] = r.target;
                out.push(Edge {
                    interaction: Interaction::new(
                        m.role.clone(),
                        t.partner.clone(),
                        t.label.clone(),
                    ),
                    target,
                });
            }
        }
    }
    out.sort_by(|a, b| a.interaction.cmp(&b.interaction));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "safe",
            Verdict::Unsafe => "unsafe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceptionError {
    pub config: Config,
    pub sender: RoleName,
    pub receiver: RoleName,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyReport {
    pub configs: usize,
    pub deadlocks: Vec<Config>,
    pub reception_errors: Vec<ReceptionError>,
    pub verdict: Verdict,
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "configurations: {}", self.configs)?;
        writeln!(f, "deadlocks: {}", self.deadlocks.len())?;
        for c in &self.deadlocks {
            writeln!(f, "  {}", ProductGraph::show(c))?;
        }
        writeln!(f, "reception errors: {}", self.reception_errors.len())?;
        for e in &self.reception_errors {
            writeln!(
                f,
                "  {}: {} sends `{}` but {} can never receive it",
                ProductGraph::show(&e.config),
                e.sender,
                e.label,
                e.receiver
            )?;
        }
        writeln!(f, "verdict: {}", self.verdict)
    }
}

/// A deadlock is a reachable, non-final configuration with no edge. A
/// reception error is a pending send whose receiver cannot accept that label
/// from that sender, now or after any steps that do not involve the sender.
pub fn check_safety(pg: &ProductGraph) -> SafetyReport {
    let mut deadlocks = Vec::new();
    let mut reception_errors = Vec::new();
    let index: BTreeMap<&RoleName, usize> =
        pg.roles.iter().enumerate().map(|(i, r)| (r, i)).collect();
    for (config, out) in &pg.edges {
        if out.is_empty() && !pg.is_final(config) {
            deadlocks.push(config.clone());
        }
        for (i, m) in pg.efsms.iter().enumerate() {
            for t in m.outgoing(config[i]) {
                if t.direction != Direction::Send {
                    continue;
                }
                let receivable = index.get(&t.partner).is_some_and(|&j| {
                    eventually_receives(&pg.efsms[j], config[j], &m.role, &t.label)
                });
                if !receivable {
                    reception_errors.push(ReceptionError {
                        config: config.clone(),
                        sender: m.role.clone(),
                        receiver: t.partner.clone(),
                        label: t.label.clone(),
                    });
                }
            }
        }
    }
    let verdict = if deadlocks.is_empty() && reception_errors.is_empty() {
        Verdict::Safe
    } else {
        Verdict::Unsafe
    };
    SafetyReport {
        configs: pg.config_count(),
        deadlocks,
        reception_errors,
        verdict,
    }
}

fn eventually_receives(m: &Efsm, from: StateId, sender: &RoleName, label: &str) -> bool {
    let mut seen = BTreeSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        for t in m.outgoing(s) {
            if &t.partner != sender {
                if seen.insert(t.target) {
                    queue.push_back(t.target);
                }
            } else if t.direction == Direction::Receive && t.label == label {
                return true;
            }
        }
    }
    false
}

pub type Trace = Vec<Interaction>;

pub enum TraceSource<'a> {
    Global {
        module: &'a Module,
        protocol: &'a str,
    },
    Product(&'a ProductGraph),
}

/// All interaction sequences of length `depth`, plus the shorter ones that
/// end because the run cannot continue.
pub fn bounded_traces(source: TraceSource<'_>, depth: usize) -> BTreeSet<Trace> {
    let mut out = BTreeSet::new();
    match source {
        TraceSource::Product(pg) => {
            product_traces(pg, &pg.initial, depth, &mut Vec::new(), &mut out);
        }
        TraceSource::Global { module, protocol } => {
            let Some(proto) = module.protocol(protocol) else {
                return out;
            };
            let entry = Instance::new(protocol, proto.roles.iter().map(RoleName::from));
            let Some(start) = GlobalState::enter(module, &entry) else {
                return out;
            };
            global_traces(module, start, depth, &mut Vec::new(), &mut out);
        }
    }
    out
}

fn product_traces(
    pg: &ProductGraph,
    config: &Config,
    depth: usize,
    prefix: &mut Trace,
    out: &mut BTreeSet<Trace>,
) {
    let edges = pg.outgoing(config);
    if depth == 0 || edges.is_empty() {
        out.insert(prefix.clone());
        return;
    }
    for e in edges {
        prefix.push(e.interaction.clone());
        product_traces(pg, &e.target, depth - 1, prefix, out);
        prefix.pop();
    }
}

/// Remaining statements of the current protocol body, under the role
/// substitution of the instance being run. `do` is always in tail position,
/// so no return stack is needed.
#[derive(Clone)]
struct GlobalState<'m> {
    stmts: Vec<&'m GStatement>,
    subst: Rc<BTreeMap<String, RoleName>>,
}

impl<'m> GlobalState<'m> {
    fn enter(module: &'m Module, inst: &Instance) -> Option<Self> {
        let proto = module.protocol(&inst.protocol)?;
        if proto.roles.len() != inst.role_args.len() {
            return None;
        }
        Some(GlobalState {
            stmts: proto.body.iter().collect(),
            subst: Rc::new(substitution(proto, inst)),
        })
    }

    fn role(&self, name: &str) -> RoleName {
        self.subst
            .get(name)
            .cloned()
            .unwrap_or_else(|| RoleName::new(name))
    }
}

/// Next interactions of a global state, resolving choices and `do` calls.
/// `None` means the protocol has ended.
fn global_steps<'m>(
    module: &'m Module,
    state: GlobalState<'m>,
) -> Option<Vec<(Interaction, GlobalState<'m>)>> {
    let mut steps = Vec::new();
    let mut ended = false;
    let mut pending = vec![(state, BTreeSet::new())];
    while let Some((st, mut entered)) = pending.pop() {
        let Some((first, rest)) = st.stmts.split_first() else {
            ended = true;
            continue;
        };
        match first {
            GStatement::Message(m) => {
                let next = GlobalState {
                    stmts: rest.to_vec(),
                    subst: st.subst.clone(),
                };
                steps.push((
                    Interaction::new(
                        st.role(m.from.as_str()),
                        st.role(m.to.as_str()),
                        m.label.name.clone(),
                    ),
                    next,
                ));
            }
            GStatement::Choice(c) => {
                for branch in c.branches.iter().rev() {
                    let mut stmts: Vec<&GStatement> = branch.iter().collect();
                    stmts.extend_from_slice(rest);
                    pending.push((
                        GlobalState {
                            stmts,
                            subst: st.subst.clone(),
                        },
                        entered.clone(),
                    ));
                }
            }
            GStatement::Do(d) => {
                let inst = Instance::new(
                    d.target.name.clone(),
                    d.role_args.iter().map(|r| st.role(r.as_str())),
                );
                // Re-entering an instance without an intervening interaction
                // would loop forever without producing anything.
                if !entered.insert(inst.clone()) {
                    continue;
                }
                if let Some(next) = GlobalState::enter(module, &inst) {
                    pending.push((next, entered));
                }
            }
        }
    }
    if steps.is_empty() && ended {
        None
    } else {
        Some(steps)
    }
}

fn global_traces<'m>(
    module: &'m Module,
    state: GlobalState<'m>,
    depth: usize,
    prefix: &mut Trace,
    out: &mut BTreeSet<Trace>,
) {
    if depth == 0 {
        out.insert(prefix.clone());
        return;
    }
    let steps = global_steps(module, state).unwrap_or_default();
    if steps.is_empty() {
        out.insert(prefix.clone());
        return;
    }
    for (interaction, next) in steps {
        prefix.push(interaction);
        global_traces(module, next, depth - 1, prefix, out);
        prefix.pop();
    }
}
