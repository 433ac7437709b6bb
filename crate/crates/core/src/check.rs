//! Well-formedness checking.
//!
//! Name resolution and statement-shape rules are checked first. Only when
//! those pass is every role of every protocol projected; projection
//! failures that several roles hit at the same statement are reported once.

use std::collections::{BTreeMap, HashSet};

use crate::ast::*;
use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::project::{project, ProjectionError};
use crate::span::SourceSpan;

pub fn check_well_formed(module: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    check_names(module, &mut diags);
    for p in &module.protocols {
        check_protocol(module, p, &mut diags);
    }
    if diags.is_empty() {
        check_projections(module, &mut diags);
    }
    diags
}

fn check_names(module: &Module, diags: &mut Vec<Diagnostic>) {
    let mut aliases = HashSet::new();
    for imp in &module.type_imports {
        if Primitive::from_name(imp.alias.as_str()).is_some() {
            diags.push(Diagnostic::error(
                DiagnosticCode::InvalidImportAlias,
                imp.alias.span.clone(),
                format!("import alias `{}` shadows a primitive type", imp.alias),
            ));
        } else if !aliases.insert(imp.alias.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticCode::DuplicateImport,
                imp.alias.span.clone(),
                format!("type alias `{}` is imported more than once", imp.alias),
            ));
        }
    }
    let mut names = HashSet::new();
    for p in &module.protocols {
        if !names.insert(p.name.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticCode::DuplicateProtocol,
                p.name.span.clone(),
                format!("protocol `{}` is defined more than once", p.name),
            ));
        }
    }
}

struct Scope<'a> {
    module: &'a Module,
    roles: HashSet<&'a str>,
}

fn check_protocol(module: &Module, p: &GlobalProtocol, diags: &mut Vec<Diagnostic>) {
    let mut roles = HashSet::new();
    for r in &p.roles {
        if !roles.insert(r.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticCode::DuplicateRole,
                r.span.clone(),
                format!("role `{r}` is declared more than once"),
            ));
        }
    }
    if p.roles.len() < 2 {
        diags.push(Diagnostic::error(
            DiagnosticCode::TooFewRoles,
            p.name.span.clone(),
            format!("protocol `{}` must declare at least two roles", p.name),
        ));
    }
    let scope = Scope { module, roles };
    check_body(&scope, &p.body, true, diags);
}

fn check_role(scope: &Scope, role: &Ident, diags: &mut Vec<Diagnostic>) -> bool {
    if scope.roles.contains(role.as_str()) {
        true
    } else {
        diags.push(Diagnostic::error(
            DiagnosticCode::UnknownRole,
            role.span.clone(),
            format!("role `{role}` is not declared"),
        ));
        false
    }
}

/// `tail` is true when nothing follows `body` in the enclosing protocol.
fn check_body(scope: &Scope, body: &GBody, tail: bool, diags: &mut Vec<Diagnostic>) {
    for (i, stmt) in body.iter().enumerate() {
        let last = i + 1 == body.len();
        match stmt {
            GStatement::Message(m) => {
                let from_ok = check_role(scope, &m.from, diags);
                let to_ok = check_role(scope, &m.to, diags);
                if from_ok && to_ok && m.from.name == m.to.name {
                    diags.push(Diagnostic::error(
                        DiagnosticCode::SelfCommunication,
                        m.span.clone(),
                        format!("role `{}` sends `{}` to itself", m.from, m.label),
                    ));
                }
                for payload in &m.payloads {
                    if let Err(d) = resolve_payload(payload, scope.module) {
                        diags.push(d);
                    }
                }
            }
            GStatement::Choice(c) => {
                check_role(scope, &c.at, diags);
                for branch in &c.branches {
                    check_body(scope, branch, tail && last, diags);
                }
            }
            GStatement::Do(d) => check_do(scope, d, tail && last, diags),
        }
    }
}

fn check_do(scope: &Scope, d: &DoCall, tail: bool, diags: &mut Vec<Diagnostic>) {
    if !tail {
        diags.push(Diagnostic::error(
            DiagnosticCode::NonTailDo,
            d.span.clone(),
            "`do` must be the last action of the protocol",
        ));
    }
    match scope.module.protocol(d.target.as_str()) {
        None => diags.push(Diagnostic::error(
            DiagnosticCode::UnknownProtocol,
            d.target.span.clone(),
            format!("unknown protocol `{}`", d.target),
        )),
        Some(target) if target.roles.len() != d.role_args.len() => diags.push(Diagnostic::error(
            DiagnosticCode::ArityMismatch,
            d.span.clone(),
            format!(
                "`{}` expects {} role arguments, got {}",
                d.target,
                target.roles.len(),
                d.role_args.len()
            ),
        )),
        Some(_) => {}
    }
    let mut seen = HashSet::new();
    for arg in &d.role_args {
        if check_role(scope, arg, diags) && !seen.insert(arg.as_str()) {
            diags.push(Diagnostic::error(
                DiagnosticCode::DuplicateRoleArgument,
                arg.span.clone(),
                format!("role `{arg}` is passed more than once"),
            ));
        }
    }
}

fn check_projections(module: &Module, diags: &mut Vec<Diagnostic>) {
    // One report per offending statement. When roles fail there for different
    // reasons, a non-directed choice explains the merge failures it causes.
    let mut grouped: BTreeMap<SpanKey, Vec<ProjectionError>> = BTreeMap::new();
    for p in &module.protocols {
        for role in &p.roles {
            if let Err(e) = project(module, p.name.as_str(), role.as_str()) {
                grouped.entry(SpanKey::of(&e.span)).or_default().push(e);
            }
        }
    }
    for errors in grouped.into_values() {
        let primary = errors
            .iter()
            .min_by_key(|e| e.code() != DiagnosticCode::NonDirectedChoice)
            .unwrap();
        let roles: Vec<String> = errors
            .iter()
            .filter(|e| e.code() == primary.code())
            .map(|e| format!("`{}`", e.role))
            .collect();
        let noun = if roles.len() == 1 { "role" } else { "roles" };
        diags.push(Diagnostic::error(
            primary.code(),
            primary.span.clone(),
            format!(
                "cannot project onto {noun} {}: {}",
                roles.join(", "),
                primary.kind
            ),
        ));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct SpanKey(String, u32, u32, u32, u32);

impl SpanKey {
    fn of(s: &SourceSpan) -> Self {
        SpanKey(
            s.file.to_string(),
            s.line_start,
            s.col_start,
            s.line_end,
            s.col_end,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_module;

    fn codes(src: &str) -> Vec<DiagnosticCode> {
        let m = parse_module(src).expect("parses");
        check_well_formed(&m).into_iter().map(|d| d.code).collect()
    }

    fn protocol(body: &str) -> String {
        format!("module M;\nglobal protocol P(role A, role B) {{\n{body}\n}}\n")
    }

    #[test]
    fn game_is_well_formed() {
        let m = parse_module(include_str!("../tests/fixtures/game.scr")).unwrap();
        assert_eq!(check_well_formed(&m), vec![]);
    }

    #[test]
    fn self_send() {
        assert_eq!(
            codes(&protocol("X(int) from A to A;")),
            [DiagnosticCode::SelfCommunication]
        );
    }

    #[test]
    fn unmergeable_choice_reported_once() {
        let src = protocol(
            "choice at A { L(int) from A to B; } or { L(int) from A to B; M(int) from B to A; }",
        );
        let m = parse_module(&src).unwrap();
        let diags = check_well_formed(&m);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert_eq!(diags[0].code, DiagnosticCode::MergeError);
        assert!(diags[0].message.contains("`B`"), "{}", diags[0].message);
        assert_eq!((diags[0].span.line_start, diags[0].span.col_start), (3, 1));
    }

    #[test]
    fn independent_failures_are_all_reported() {
        let src = protocol("X(Foo) from A to C;\nY(int) from B to B;\ndo Q(A, B);");
        assert_eq!(
            codes(&src),
            [
                DiagnosticCode::UnknownRole,
                DiagnosticCode::UnknownType,
                DiagnosticCode::SelfCommunication,
                DiagnosticCode::UnknownProtocol,
            ]
        );
    }

    #[test]
    fn non_tail_do_inside_choice_followed_by_more() {
        let src = protocol(
            "choice at A { X() from A to B; do P(A, B); } or { Y() from A to B; }\nZ() from B to A;",
        );
        assert_eq!(codes(&src), [DiagnosticCode::NonTailDo]);
    }

    #[test]
    fn duplicate_role_argument() {
        let src = protocol("X() from A to B; do P(A, A);");
        assert_eq!(codes(&src), [DiagnosticCode::DuplicateRoleArgument]);
    }

    #[test]
    fn declaration_level_errors() {
        let src = "module M;\n\
                   type <typescript> \"T\" from \"./t\" as T;\n\
                   type <typescript> \"U\" from \"./u\" as T;\n\
                   type <typescript> \"I\" from \"./i\" as int;\n\
                   global protocol P(role A) { }\n\
                   global protocol P(role A, role A) { }\n";
        assert_eq!(
            codes(src),
            [
                DiagnosticCode::DuplicateImport,
                DiagnosticCode::InvalidImportAlias,
                DiagnosticCode::DuplicateProtocol,
                DiagnosticCode::TooFewRoles,
                DiagnosticCode::DuplicateRole,
            ]
        );
    }

    #[test]
    fn unguarded_recursion_surfaces() {
        let src = "module M;\nglobal protocol P(role A, role B, role C) { X() from A to B; do P(A, B, C); }";
        assert_eq!(codes(src), [DiagnosticCode::UnguardedRecursion]);
    }

    #[test]
    fn undirected_choice_surfaces() {
        let src = protocol("choice at A { X() from B to A; } or { Y() from A to B; }");
        assert_eq!(codes(&src), [DiagnosticCode::NonDirectedChoice]);
    }
}
