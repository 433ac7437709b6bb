//! Projection of a global protocol onto one role.
//!
//! `do` calls are unfolded into named instances (protocol + actual role
//! arguments) until the set of instances is closed. Sibling choice branches
//! are combined with [`merge`] for every role except the deciding one, which
//! gets a single flattened selection.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::*;
use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::local::{
    merge, BranchArm, Instance, LocalSystem, LocalSystemError, LocalType, SelectArm,
};
use crate::span::SourceSpan;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionErrorKind {
    #[error("unknown protocol `{0}`")]
    UnknownProtocol(String),
    #[error("role `{0}` is not declared")]
    UnknownRole(String),
    #[error("`{protocol}` expects {expected} role arguments, got {found}")]
    ArityMismatch {
        protocol: String,
        expected: usize,
        found: usize,
    },
    #[error("role `{0}` is passed more than once")]
    DuplicateRoleArgument(String),
    #[error("`do` must be the last action of the protocol")]
    NonTailDo,
    #[error("role `{0}` sends a message to itself")]
    SelfCommunication(String),
    #[error("cannot merge `{left}` with `{right}`")]
    Merge {
        left: Box<LocalType>,
        right: Box<LocalType>,
    },
    #[error("a branch of the choice at `{0}` does not start with a message sent by `{0}`")]
    NonDirectedChoice(String),
    #[error("recursion through `{0}` performs no action")]
    UnguardedRecursion(Instance),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("projection onto `{role}` failed: {kind}")]
pub struct ProjectionError {
    pub role: RoleName,
    pub kind: ProjectionErrorKind,
    pub span: SourceSpan,
}

impl ProjectionError {
    pub fn code(&self) -> DiagnosticCode {
        match self.kind {
            ProjectionErrorKind::UnknownProtocol(_) => DiagnosticCode::UnknownProtocol,
            ProjectionErrorKind::UnknownRole(_) => DiagnosticCode::UnknownRole,
            ProjectionErrorKind::ArityMismatch { .. } => DiagnosticCode::ArityMismatch,
            ProjectionErrorKind::DuplicateRoleArgument(_) => DiagnosticCode::DuplicateRoleArgument,
            ProjectionErrorKind::NonTailDo => DiagnosticCode::NonTailDo,
            ProjectionErrorKind::SelfCommunication(_) => DiagnosticCode::SelfCommunication,
            ProjectionErrorKind::Merge { .. } => DiagnosticCode::MergeError,
            ProjectionErrorKind::NonDirectedChoice(_) => DiagnosticCode::NonDirectedChoice,
            ProjectionErrorKind::UnguardedRecursion(_) => DiagnosticCode::UnguardedRecursion,
        }
    }

    pub fn to_diagnostic(&self) -> Diagnostic {
        Diagnostic::error(self.code(), self.span.clone(), self.to_string())
    }
}

/// Projects `protocol` onto `role`, starting from the instance that applies
/// the protocol to its own declared roles.
pub fn project(
    module: &Module,
    protocol: &str,
    role: &str,
) -> Result<LocalSystem, ProjectionError> {
    let role = RoleName::from(role);
    let Some(proto) = module.protocol(protocol) else {
        return Err(ProjectionError {
            role,
            kind: ProjectionErrorKind::UnknownProtocol(protocol.to_owned()),
            span: module.span.clone(),
        });
    };
    if !proto.roles.iter().any(|r| r.name == role.as_str()) {
        return Err(ProjectionError {
            kind: ProjectionErrorKind::UnknownRole(role.to_string()),
            role,
            span: proto.span.clone(),
        });
    }
    let entry = Instance::new(protocol, proto.roles.iter().map(RoleName::from));
    let mut projector = Projector {
        module,
        role: role.clone(),
        var_spans: BTreeMap::new(),
    };
    let mut defs = BTreeMap::new();
    let mut pending = vec![(entry.clone(), proto.span.clone())];
    while let Some((inst, span)) = pending.pop() {
        if defs.contains_key(&inst) {
            continue;
        }
        let def = projector.instance(&inst, &span)?;
        for v in def.vars() {
            if !defs.contains_key(v) {
                let span = projector.var_spans[v].clone();
                pending.push((v.clone(), span));
            }
        }
        defs.insert(inst, def);
    }
    let sys = LocalSystem {
        role: role.clone(),
        defs,
        entry,
    };
    match sys.validate() {
        Ok(()) => Ok(sys),
        Err(LocalSystemError::Unguarded(inst)) | Err(LocalSystemError::Undefined(inst)) => {
            let span = projector
                .var_spans
                .get(&inst)
                .cloned()
                .unwrap_or_else(|| proto.span.clone());
            Err(ProjectionError {
                role,
                kind: ProjectionErrorKind::UnguardedRecursion(inst),
                span,
            })
        }
    }
}

/// Every instance reachable from the protocol's entry instance, independent
/// of any particular role.
pub fn instance_closure(module: &Module, protocol: &str) -> BTreeSet<Instance> {
    let mut seen = BTreeSet::new();
    let Some(proto) = module.protocol(protocol) else {
        return seen;
    };
    let mut pending = vec![Instance::new(
        protocol,
        proto.roles.iter().map(RoleName::from),
    )];
    while let Some(inst) = pending.pop() {
        let Some(p) = module.protocol(&inst.protocol) else {
            continue;
        };
        if p.roles.len() != inst.role_args.len() || !seen.insert(inst.clone()) {
            continue;
        }
        let subst = substitution(p, &inst);
        let mut calls = Vec::new();
        collect_calls(&p.body, &mut calls);
        for call in calls {
            let args = call
                .role_args
                .iter()
                .map(|r| {
                    subst
                        .get(r.as_str())
                        .cloned()
                        .unwrap_or_else(|| RoleName::from(r))
                })
                .collect::<Vec<_>>();
            pending.push(Instance::new(call.target.name.clone(), args));
        }
    }
    seen
}

fn collect_calls<'a>(body: &'a GBody, out: &mut Vec<&'a DoCall>) {
    for stmt in body {
        match stmt {
            GStatement::Do(d) => out.push(d),
            GStatement::Choice(c) => c.branches.iter().for_each(|b| collect_calls(b, out)),
            GStatement::Message(_) => {}
        }
    }
}

/// Maps each formal role of `proto` to its actual role in `inst`.
pub(crate) fn substitution(proto: &GlobalProtocol, inst: &Instance) -> BTreeMap<String, RoleName> {
    proto
        .roles
        .iter()
        .map(|r| r.name.clone())
        .zip(inst.role_args.iter().cloned())
        .collect()
}

struct Projector<'m> {
    module: &'m Module,
    role: RoleName,
    /// Span of the first `do` that introduced each instance.
    var_spans: BTreeMap<Instance, SourceSpan>,
}

struct Frame {
    subst: BTreeMap<String, RoleName>,
}

impl<'m> Projector<'m> {
    fn fail(&self, kind: ProjectionErrorKind, span: &SourceSpan) -> ProjectionError {
        ProjectionError {
            role: self.role.clone(),
            kind,
            span: span.clone(),
        }
    }

    fn instance(
        &mut self,
        inst: &Instance,
        span: &SourceSpan,
    ) -> Result<LocalType, ProjectionError> {
        let Some(proto) = self.module.protocol(&inst.protocol) else {
            return Err(self.fail(
                ProjectionErrorKind::UnknownProtocol(inst.protocol.clone()),
                span,
            ));
        };
        if proto.roles.len() != inst.role_args.len() {
            return Err(self.fail(
                ProjectionErrorKind::ArityMismatch {
                    protocol: inst.protocol.clone(),
                    expected: proto.roles.len(),
                    found: inst.role_args.len(),
                },
                span,
            ));
        }
        let frame = Frame {
            subst: substitution(proto, inst),
        };
        let stmts: Vec<&'m GStatement> = proto.body.iter().collect();
        self.sequence(&stmts, &frame)
    }

    fn actual(&self, frame: &Frame, id: &Ident) -> Result<RoleName, ProjectionError> {
        frame
            .subst
            .get(id.as_str())
            .cloned()
            .ok_or_else(|| self.fail(ProjectionErrorKind::UnknownRole(id.name.clone()), &id.span))
    }

    fn sequence(
        &mut self,
        stmts: &[&'m GStatement],
        frame: &Frame,
    ) -> Result<LocalType, ProjectionError> {
        let Some((first, rest)) = stmts.split_first() else {
            return Ok(LocalType::End);
        };
        match first {
            GStatement::Message(m) => {
                let from = self.actual(frame, &m.from)?;
                let to = self.actual(frame, &m.to)?;
                if from == to {
                    return Err(self.fail(
                        ProjectionErrorKind::SelfCommunication(from.to_string()),
                        &m.span,
                    ));
                }
                let payloads: Vec<String> =
                    m.payloads.iter().map(|p| p.name.name.clone()).collect();
                if from == self.role {
                    let cont = self.sequence(rest, frame)?;
                    Ok(LocalType::Select(vec![SelectArm {
                        to,
                        label: m.label.name.clone(),
                        payloads,
                        cont,
                    }]))
                } else if to == self.role {
                    let cont = self.sequence(rest, frame)?;
                    Ok(LocalType::Branch {
                        from,
                        arms: vec![BranchArm {
                            label: m.label.name.clone(),
                            payloads,
                            cont,
                        }],
                    })
                } else {
                    self.sequence(rest, frame)
                }
            }
            GStatement::Choice(c) => {
                let decider = self.actual(frame, &c.at)?;
                let mut projections = Vec::with_capacity(c.branches.len());
                for branch in &c.branches {
                    if decider == self.role && !self.starts_with_send(branch, frame, &decider)? {
                        return Err(self.fail(
                            ProjectionErrorKind::NonDirectedChoice(decider.to_string()),
                            &c.span,
                        ));
                    }
                    let mut stmts: Vec<&'m GStatement> = branch.iter().collect();
                    stmts.extend_from_slice(rest);
                    projections.push(self.sequence(&stmts, frame)?);
                }
                if decider == self.role {
                    self.flatten_select(projections, &c.span)
                } else {
                    let mut iter = projections.into_iter();
                    let mut acc = iter.next().unwrap_or(LocalType::End);
                    for next in iter {
                        acc = merge(&acc, &next).map_err(|e| {
                            self.fail(
                                ProjectionErrorKind::Merge {
                                    left: Box::new(e.left),
                                    right: Box::new(e.right),
                                },
                                &c.span,
                            )
                        })?;
                    }
                    Ok(acc)
                }
            }
            GStatement::Do(d) => {
                if !rest.is_empty() {
                    return Err(self.fail(ProjectionErrorKind::NonTailDo, &d.span));
                }
                let mut args = Vec::with_capacity(d.role_args.len());
                for r in &d.role_args {
                    let a = self.actual(frame, r)?;
                    if args.contains(&a) {
                        return Err(self.fail(
                            ProjectionErrorKind::DuplicateRoleArgument(a.to_string()),
                            &r.span,
                        ));
                    }
                    args.push(a);
                }
                if !args.contains(&self.role) {
                    return Ok(LocalType::End);
                }
                let inst = Instance::new(d.target.name.clone(), args);
                self.var_spans
                    .entry(inst.clone())
                    .or_insert_with(|| d.span.clone());
                Ok(LocalType::Var(inst))
            }
        }
    }

    fn starts_with_send(
        &self,
        branch: &GBody,
        frame: &Frame,
        decider: &RoleName,
    ) -> Result<bool, ProjectionError> {
        match branch.first() {
            Some(GStatement::Message(m)) => Ok(&self.actual(frame, &m.from)? == decider),
            _ => Ok(false),
        }
    }

    fn flatten_select(
        &self,
        projections: Vec<LocalType>,
        span: &SourceSpan,
    ) -> Result<LocalType, ProjectionError> {
        let mut arms: Vec<SelectArm> = Vec::new();
        for p in projections {
            let LocalType::Select(branch_arms) = p else {
                unreachable!("directed branches project to selections");
            };
            for arm in branch_arms {
                if let Some(existing) = arms.iter().find(|a| a.label == arm.label) {
                    return Err(self.fail(
                        ProjectionErrorKind::Merge {
                            left: Box::new(LocalType::Select(vec![existing.clone()])),
                            right: Box::new(LocalType::Select(vec![arm])),
                        },
                        span,
                    ));
                }
                arms.push(arm);
            }
        }
        Ok(LocalType::Select(arms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local::tests::{recv, send};
    use crate::parser::parse_module;

    const GAME: &str = include_str!("../tests/fixtures/game.scr");

    fn game_instance(args: [&str; 3]) -> Instance {
        Instance::new("Game", args.map(RoleName::from))
    }

    fn var(args: [&str; 3]) -> LocalType {
        LocalType::Var(game_instance(args))
    }

    #[test]
    fn server_projection() {
        let m = parse_module(GAME).unwrap();
        let sys = project(&m, "Game", "Svr").unwrap();
        assert_eq!(sys.entry, game_instance(["Svr", "P1", "P2"]));
        assert_eq!(sys.defs.len(), 2);
        let first = recv(
            "P1",
            vec![(
                "Pos",
                send(
                    "P2",
                    vec![
                        ("Lose", send("P1", vec![("Win", LocalType::End)])),
                        ("Draw", send("P1", vec![("Draw", LocalType::End)])),
                        (
                            "Update",
                            send("P1", vec![("Update", var(["Svr", "P2", "P1"]))]),
                        ),
                    ],
                ),
            )],
        );
        assert_eq!(sys.defs[&game_instance(["Svr", "P1", "P2"])], first);
        let second = recv(
            "P2",
            vec![(
                "Pos",
                send(
                    "P1",
                    vec![
                        ("Lose", send("P2", vec![("Win", LocalType::End)])),
                        ("Draw", send("P2", vec![("Draw", LocalType::End)])),
                        (
                            "Update",
                            send("P2", vec![("Update", var(["Svr", "P1", "P2"]))]),
                        ),
                    ],
                ),
            )],
        );
        assert_eq!(sys.defs[&game_instance(["Svr", "P2", "P1"])], second);
    }

    #[test]
    fn player_projection() {
        let m = parse_module(GAME).unwrap();
        let sys = project(&m, "Game", "P1").unwrap();
        let moving = send(
            "Svr",
            vec![(
                "Pos",
                recv(
                    "Svr",
                    vec![
                        ("Win", LocalType::End),
                        ("Draw", LocalType::End),
                        ("Update", var(["Svr", "P2", "P1"])),
                    ],
                ),
            )],
        );
        let waiting = recv(
            "Svr",
            vec![
                ("Lose", LocalType::End),
                ("Draw", LocalType::End),
                ("Update", var(["Svr", "P1", "P2"])),
            ],
        );
        assert_eq!(sys.defs[&game_instance(["Svr", "P1", "P2"])], moving);
        assert_eq!(sys.defs[&game_instance(["Svr", "P2", "P1"])], waiting);
    }

    #[test]
    fn receiver_of_single_message() {
        let m = parse_module("module M; global protocol P(role A, role B) { X(int) from A to B; }")
            .unwrap();
        let sys = project(&m, "P", "B").unwrap();
        let LocalType::Branch { from, arms } = &sys.defs[&sys.entry] else {
            panic!()
        };
        assert_eq!(from, "A");
        assert_eq!(arms.len(), 1);
        assert_eq!(arms[0].cont, LocalType::End);
    }

    #[test]
    fn uninvolved_role_is_end() {
        let m = parse_module(
            "module M; global protocol P(role A, role B, role C) { X(int) from A to B; }",
        )
        .unwrap();
        let sys = project(&m, "P", "C").unwrap();
        assert_eq!(sys.defs[&sys.entry], LocalType::End);
    }

    #[test]
    fn instance_closure_of_game() {
        let m = parse_module(GAME).unwrap();
        let closure = instance_closure(&m, "Game");
        let expected: BTreeSet<_> = [
            game_instance(["Svr", "P1", "P2"]),
            game_instance(["Svr", "P2", "P1"]),
        ]
        .into_iter()
        .collect();
        assert_eq!(closure, expected);
    }

    #[test]
    fn choice_continuation_is_shared() {
        let m = parse_module(
            "module M; global protocol P(role S, role C) { \
             choice at S { A() from S to C; } or { B() from S to C; } Fin(bool) from C to S; }",
        )
        .unwrap();
        let sys = project(&m, "P", "C").unwrap();
        assert_eq!(
            sys.defs[&sys.entry].to_string(),
            "S&{ A().S!Fin(bool).end, B().S!Fin(bool).end }"
        );
    }

    #[test]
    fn undirected_choice() {
        let m = parse_module(
            "module M; global protocol P(role A, role B) { \
             choice at A { X() from B to A; } or { Y() from A to B; } }",
        )
        .unwrap();
        let err = project(&m, "P", "A").unwrap_err();
        assert!(matches!(
            err.kind,
            ProjectionErrorKind::NonDirectedChoice(_)
        ));
        assert_eq!(err.code(), DiagnosticCode::NonDirectedChoice);
    }

    #[test]
    fn unguarded_recursion_for_idle_role() {
        let m = parse_module(
            "module M; global protocol P(role A, role B, role C) { X() from A to B; do P(A, B, C); }",
        )
        .unwrap();
        assert!(project(&m, "P", "A").is_ok());
        let err = project(&m, "P", "C").unwrap_err();
        assert!(matches!(
            err.kind,
            ProjectionErrorKind::UnguardedRecursion(_)
        ));
        assert_eq!(err.span.col_start, 72);
    }

    #[test]
    fn unknown_role_and_protocol() {
        let m = parse_module(GAME).unwrap();
        assert!(matches!(
            project(&m, "Nope", "Svr").unwrap_err().kind,
            ProjectionErrorKind::UnknownProtocol(_)
        ));
        assert!(matches!(
            project(&m, "Game", "P3").unwrap_err().kind,
            ProjectionErrorKind::UnknownRole(_)
        ));
    }

    #[test]
    fn deterministic() {
        let m = parse_module(GAME).unwrap();
        for role in ["Svr", "P1", "P2"] {
            assert_eq!(
                project(&m, "Game", role).unwrap(),
                project(&m, "Game", role).unwrap()
            );
        }
    }
}
