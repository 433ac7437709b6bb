//! TypeScript API generation from endpoint machines.
//!
//! Both targets share the label enum, the transition table and the payload
//! type mapping; they differ in how states are encoded. [`node`] encodes
//! states as callback/tuple types executed by a runtime class, [`browser`]
//! as abstract React components rendered by a runtime component.

pub mod behavior;
pub mod browser;
pub mod node;
mod ts;

use std::collections::BTreeMap;
use std::fmt::Write;

use thiserror::Error;

use crate::ast::{GStatement, Module, Primitive, RoleName};
use crate::efsm::{Direction, Efsm, StateId, StateKind};
use crate::project::{instance_closure, substitution};

pub use behavior::{emit_runtime_behavior_spec, parse_behavior_spec, BehaviorSpec, BehaviorStep};
pub use browser::{
    affinity_audit, emit_browser_api, AffinityReport, RuntimeComponentSpec, StateComponentSpec,
};
pub use node::emit_node_api;
pub use ts::{check_closed, exposed_channels, public_api, ApiItem, ClosednessError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodegenError {
    #[error("`{sender}` -> `{receiver}` ({label}) in `{protocol}` does not involve the server role `{server}`")]
    UnsupportedTopology {
        protocol: String,
        server: RoleName,
        sender: RoleName,
        receiver: RoleName,
        label: String,
    },
    #[error("`{name}` cannot be used as a TypeScript {what}")]
    InvalidIdentifier { name: String, what: &'static str },
    #[error("browser code cannot be generated for the server role `{0}`")]
    ServerRoleRequested(RoleName),
    #[error("server code can only be generated for the server role, not `{0}`")]
    NotServerRole(RoleName),
    #[error("type import `{alias}` targets `{tag}`; only `typescript` is supported")]
    UnsupportedImportTarget { alias: String, tag: String },
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("role `{role}` is not declared by `{protocol}`")]
    UnknownRole { protocol: String, role: RoleName },
    #[error("payload type `{0}` is not defined")]
    UnknownType(String),
    #[error("state map does not match the machine: {0}")]
    StateMapMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Node,
    Browser,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Node => "node",
            Target::Browser => "browser",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub state: StateId,
    pub kind: &'static str,
    pub encoding: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBundle {
    pub target: Target,
    pub role: RoleName,
    /// Relative path → file contents.
    pub files: BTreeMap<String, String>,
    pub manifest: Vec<ManifestEntry>,
    pub table: TransitionTable,
}

impl SourceBundle {
    /// One line per state: `S0 receive Pos(Point) -> S1`.
    pub fn manifest_text(&self) -> String {
        let mut out = String::new();
        for e in &self.manifest {
            writeln!(out, "{} {} {}", e.state, e.kind, e.encoding).unwrap();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub partner: RoleName,
    pub direction: Direction,
    pub target: StateId,
    pub arity: usize,
}

/// `(state, label) → (partner, direction, target)`, one row per transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionTable {
    pub rows: BTreeMap<(StateId, String), TableRow>,
}

impl TransitionTable {
    pub fn from_efsm(efsm: &Efsm) -> Self {
        let mut rows = BTreeMap::new();
        for (state, ts) in &efsm.transitions {
            for t in ts {
                rows.insert(
                    (*state, t.label.clone()),
                    TableRow {
                        partner: t.partner.clone(),
                        direction: t.direction,
                        target: t.target,
                        arity: t.payloads.len(),
                    },
                );
            }
        }
        TransitionTable { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Every message of every instance reachable from `protocol` must have
/// `server` as sender or receiver.
pub fn check_topology(
    module: &Module,
    protocol: &str,
    server: &RoleName,
) -> Result<(), CodegenError> {
    let proto = module
        .protocol(protocol)
        .ok_or_else(|| CodegenError::UnknownProtocol(protocol.to_owned()))?;
    if !proto.roles.iter().any(|r| r.name == server.as_str()) {
        return Err(CodegenError::UnknownRole {
            protocol: protocol.to_owned(),
            role: server.clone(),
        });
    }
    for inst in instance_closure(module, protocol) {
        let Some(p) = module.protocol(&inst.protocol) else {
            continue;
        };
        let subst = substitution(p, &inst);
        let mut stack: Vec<&GStatement> = p.body.iter().collect();
        while let Some(stmt) = stack.pop() {
            match stmt {
                GStatement::Message(m) => {
                    let actual =
                        |r: &str| subst.get(r).cloned().unwrap_or_else(|| RoleName::new(r));
                    let (sender, receiver) = (actual(m.from.as_str()), actual(m.to.as_str()));
                    if &sender != server && &receiver != server {
                        return Err(CodegenError::UnsupportedTopology {
                            protocol: inst.to_string(),
                            server: server.clone(),
                            sender,
                            receiver,
                            label: m.label.name.clone(),
                        });
                    }
                }
                GStatement::Choice(c) => stack.extend(c.branches.iter().flatten()),
                GStatement::Do(_) => {}
            }
        }
    }
    Ok(())
}

const RESERVED: &[&str] = &[
    "any",
    "as",
    "async",
    "await",
    "bigint",
    "boolean",
    "break",
    "case",
    "catch",
    "class",
    "const",
    "continue",
    "debugger",
    "declare",
    "default",
    "delete",
    "do",
    "else",
    "enum",
    "export",
    "extends",
    "false",
    "finally",
    "for",
    "function",
    "if",
    "implements",
    "import",
    "in",
    "instanceof",
    "interface",
    "let",
    "never",
    "new",
    "null",
    "number",
    "object",
    "package",
    "private",
    "protected",
    "public",
    "return",
    "static",
    "string",
    "super",
    "switch",
    "symbol",
    "this",
    "throw",
    "true",
    "try",
    "type",
    "typeof",
    "undefined",
    "unknown",
    "var",
    "void",
    "while",
    "with",
    "yield",
];

/// Names the generated files declare themselves.
const GENERATED: &[&str] = &[
    "Labels",
    "States",
    "index",
    "React",
    "Session",
    "Socket",
    "SocketServer",
    "Frame",
    "Factory",
    "SendTrigger",
    "EventName",
    "Transition",
    "StateInfo",
    "Token",
];

/// Members every object or React component already has.
const INHERITED: &[&str] = &[
    "constructor",
    "__proto__",
    "hasOwnProperty",
    "toString",
    "valueOf",
    "prototype",
];

const REACT_MEMBERS: &[&str] = &[
    "render",
    "props",
    "state",
    "context",
    "refs",
    "setState",
    "forceUpdate",
    "componentDidMount",
    "componentDidUpdate",
    "componentWillUnmount",
    "shouldComponentUpdate",
    "componentDidCatch",
    "getSnapshotBeforeUpdate",
];

fn is_state_name(name: &str) -> bool {
    name.len() > 1 && name.starts_with('S') && name[1..].bytes().all(|b| b.is_ascii_digit())
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

fn invalid(name: &str, what: &'static str) -> CodegenError {
    CodegenError::InvalidIdentifier {
        name: name.to_owned(),
        what,
    }
}

/// Rejects names that would not compile or would collide with generated
/// declarations.
pub(crate) fn validate_names(
    efsm: &Efsm,
    module: &Module,
    protocol: &str,
    target: Target,
) -> Result<(), CodegenError> {
    let type_name = |name: &str, what| {
        if !is_identifier(name)
            || RESERVED.contains(&name)
            || GENERATED.contains(&name)
            || is_state_name(name)
        {
            Err(invalid(name, what))
        } else {
            Ok(())
        }
    };
    type_name(protocol, "namespace name")?;
    let proto = module
        .protocol(protocol)
        .ok_or_else(|| CodegenError::UnknownProtocol(protocol.to_owned()))?;
    for r in &proto.roles {
        type_name(r.as_str(), "role name")?;
    }
    for imp in &module.type_imports {
        if imp.target_tag.as_str() != "typescript" {
            return Err(CodegenError::UnsupportedImportTarget {
                alias: imp.alias.name.clone(),
                tag: imp.target_tag.name.clone(),
            });
        }
        type_name(imp.alias.as_str(), "type alias")?;
        if !is_identifier(&imp.external_name) || RESERVED.contains(&imp.external_name.as_str()) {
            return Err(invalid(&imp.external_name, "imported type name"));
        }
        if proto.roles.iter().any(|r| r.name == imp.alias.name) {
            return Err(invalid(imp.alias.as_str(), "type alias (it names a role)"));
        }
    }
    for label in efsm.labels() {
        if RESERVED.contains(&label) || INHERITED.contains(&label) {
            return Err(invalid(label, "label"));
        }
        if target == Target::Browser && REACT_MEMBERS.contains(&label) {
            return Err(invalid(label, "label (it names a React component member)"));
        }
    }
    for t in efsm.transitions.values().flatten() {
        for p in &t.payloads {
            ts_type(p, module)?;
        }
    }
    Ok(())
}

/// TypeScript type for one payload name.
pub(crate) fn ts_type(name: &str, module: &Module) -> Result<String, CodegenError> {
    match Primitive::from_name(name) {
        Some(Primitive::Int) => Ok("number".into()),
        Some(Primitive::String) => Ok("string".into()),
        Some(Primitive::Bool) => Ok("boolean".into()),
        None if module.import(name).is_some() => Ok(name.to_owned()),
        None => Err(CodegenError::UnknownType(name.to_owned())),
    }
}

/// A single payload is passed as-is; any other number as a tuple.
pub(crate) fn payload_type(payloads: &[String], module: &Module) -> Result<String, CodegenError> {
    let types = payloads
        .iter()
        .map(|p| ts_type(p, module))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(match types.as_slice() {
        [one] => one.clone(),
        many => format!("[{}]", many.join(", ")),
    })
}

pub(crate) fn import_lines(module: &Module) -> String {
    let mut out = String::new();
    for imp in &module.type_imports {
        let binding = if imp.external_name == imp.alias.name {
            imp.alias.name.clone()
        } else {
            format!("{} as {}", imp.external_name, imp.alias)
        };
        writeln!(
            out,
            "import type {{ {binding} }} from {};",
            js_string(&imp.source_path)
        )
        .unwrap();
    }
    out
}

pub(crate) fn labels_file(efsm: &Efsm) -> String {
    let mut out = String::from("export enum Labels {\n");
    for label in efsm.labels() {
        writeln!(out, "  {label} = \"{label}\",").unwrap();
    }
    out.push_str("}\n");
    out
}

pub(crate) fn js_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Manifest line for a state, shared by both targets.
pub(crate) fn manifest(efsm: &Efsm) -> Vec<ManifestEntry> {
    efsm.states
        .iter()
        .map(|(id, kind)| {
            let arms: Vec<String> = efsm
                .outgoing(*id)
                .iter()
                .map(|t| format!("{}({}) -> {}", t.label, t.payloads.join(", "), t.target))
                .collect();
            let encoding = match kind {
                StateKind::Send => format!("to {}", arms_by_partner(efsm, *id)),
                StateKind::Receive { from } => format!("from {from}: {}", arms.join(" | ")),
                StateKind::Terminal => "end".to_owned(),
            };
            ManifestEntry {
                state: *id,
                kind: kind.name(),
                encoding,
            }
        })
        .collect()
}

fn arms_by_partner(efsm: &Efsm, state: StateId) -> String {
    let mut by: BTreeMap<&RoleName, Vec<String>> = BTreeMap::new();
    for t in efsm.outgoing(state) {
        by.entry(&t.partner).or_default().push(format!(
            "{}({}) -> {}",
            t.label,
            t.payloads.join(", "),
            t.target
        ));
    }
    by.into_iter()
        .map(|(p, arms)| format!("{p}: {}", arms.join(" | ")))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Roles of `protocol` other than `role`, in declaration order.
pub(crate) fn other_roles(module: &Module, protocol: &str, role: &RoleName) -> Vec<RoleName> {
    module
        .protocol(protocol)
        .map(|p| {
            p.roles
                .iter()
                .filter(|r| r.name != role.as_str())
                .map(RoleName::from)
                .collect()
        })
        .unwrap_or_default()
}

pub(crate) fn check_role(
    module: &Module,
    protocol: &str,
    role: &RoleName,
) -> Result<(), CodegenError> {
    let proto = module
        .protocol(protocol)
        .ok_or_else(|| CodegenError::UnknownProtocol(protocol.to_owned()))?;
    if proto.roles.iter().any(|r| r.name == role.as_str()) {
        Ok(())
    } else {
        Err(CodegenError::UnknownRole {
            protocol: protocol.to_owned(),
            role: role.clone(),
        })
    }
}

/// Names of the states kinds in the TypeScript tables.
pub(crate) fn state_info(efsm: &Efsm) -> String {
    let mut out = String::new();
    for (id, kind) in &efsm.states {
        let body = match kind {
            StateKind::Send => "{ kind: \"send\" }".to_owned(),
            StateKind::Receive { from } => format!(
                "{{ kind: \"receive\", from: {} }}",
                js_string(from.as_str())
            ),
            StateKind::Terminal => "{ kind: \"terminal\" }".to_owned(),
        };
        writeln!(out, "  {id}: {body},").unwrap();
    }
    out
}

pub(crate) fn transition_rows(table: &TransitionTable) -> String {
    let mut by_state: BTreeMap<StateId, Vec<(&String, &TableRow)>> = BTreeMap::new();
    for ((state, label), row) in &table.rows {
        by_state.entry(*state).or_default().push((label, row));
    }
    let mut out = String::new();
    for (state, rows) in by_state {
        writeln!(out, "  {state}: {{").unwrap();
        for (label, row) in rows {
            writeln!(
                out,
                "    {label}: {{ partner: {}, direction: \"{}\", target: \"{}\", arity: {} }},",
                js_string(row.partner.as_str()),
                row.direction.name(),
                row.target,
                row.arity
            )
            .unwrap();
        }
        out.push_str("  },\n");
    }
    out
}

pub(crate) fn role_union(roles: &[RoleName]) -> String {
    if roles.is_empty() {
        return "never".to_owned();
    }
    roles
        .iter()
        .map(|r| js_string(r.as_str()))
        .collect::<Vec<_>>()
        .join(" | ")
}
