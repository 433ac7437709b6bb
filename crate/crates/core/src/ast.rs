//! Syntax tree for the supported Scribble subset.
//!
//! Every node carries a [`SourceSpan`]. Structural comparison (ignoring
//! spans) goes through [`Module::without_spans`].

use std::borrow::Borrow;
use std::fmt;

use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::span::SourceSpan;

/// Name of a protocol participant, as used after parsing (projection,
/// state machines, code generation).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoleName(String);

impl RoleName {
    pub fn new(name: impl Into<String>) -> Self {
        RoleName(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RoleName {
    fn from(s: &str) -> Self {
        RoleName(s.to_owned())
    }
}

impl From<String> for RoleName {
    fn from(s: String) -> Self {
        RoleName::new(s)
    }
}

impl From<&Ident> for RoleName {
    fn from(id: &Ident) -> Self {
        RoleName(id.name.clone())
    }
}

impl Borrow<str> for RoleName {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl PartialEq<str> for RoleName {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for RoleName {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

impl Ident {
    pub fn new(name: impl Into<String>, span: SourceSpan) -> Self {
        Ident {
            name: name.into(),
            span,
        }
    }

    /// Identifier with a placeholder span, for building trees by hand.
    pub fn synthetic(name: impl Into<String>) -> Self {
        Ident::new(name, SourceSpan::dummy())
    }

    pub fn as_str(&self) -> &str {
        &self.name
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    /// Dotted module name, e.g. `NoughtsAndCrosses` or `a.b.c`.
    pub name: Ident,
    pub type_imports: Vec<TypeImport>,
    pub protocols: Vec<GlobalProtocol>,
    pub span: SourceSpan,
}

/// `type <tag> "External" from "path" as Alias;`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeImport {
    pub target_tag: Ident,
    pub external_name: String,
    pub source_path: String,
    pub alias: Ident,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalProtocol {
    pub name: Ident,
    pub roles: Vec<Ident>,
    pub body: GBody,
    pub span: SourceSpan,
}

pub type GBody = Vec<GStatement>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GStatement {
    Message(MessageTransfer),
    Choice(Choice),
    Do(DoCall),
}

/// `Label(T1, T2) from A to B;`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageTransfer {
    pub label: Ident,
    pub payloads: Vec<PayloadRef>,
    pub from: Ident,
    pub to: Ident,
    pub span: SourceSpan,
}

/// `choice at A { ... } or { ... }`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Choice {
    pub at: Ident,
    pub branches: Vec<GBody>,
    pub span: SourceSpan,
}

/// `do P(A, B);`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoCall {
    pub target: Ident,
    pub role_args: Vec<Ident>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadRef {
    pub name: Ident,
}

impl GStatement {
    pub fn span(&self) -> &SourceSpan {
        match self {
            GStatement::Message(m) => &m.span,
            GStatement::Choice(c) => &c.span,
            GStatement::Do(d) => &d.span,
        }
    }
}

impl Module {
    pub fn protocol(&self, name: &str) -> Option<&GlobalProtocol> {
        self.protocols.iter().find(|p| p.name.name == name)
    }

    pub fn import(&self, alias: &str) -> Option<&TypeImport> {
        self.type_imports.iter().find(|i| i.alias.name == alias)
    }

    /// Copy of the tree with every span replaced by a placeholder.
    pub fn without_spans(&self) -> Module {
        let mut m = self.clone();
        m.clear_spans();
        m
    }

    /// Equality that ignores source locations.
    pub fn structurally_eq(&self, other: &Module) -> bool {
        self.without_spans() == other.without_spans()
    }

    fn clear_spans(&mut self) {
        clear(&mut self.name);
        self.span = SourceSpan::dummy();
        for imp in &mut self.type_imports {
            clear(&mut imp.target_tag);
            clear(&mut imp.alias);
            imp.span = SourceSpan::dummy();
        }
        for p in &mut self.protocols {
            clear(&mut p.name);
            p.roles.iter_mut().for_each(clear);
            p.span = SourceSpan::dummy();
            clear_body(&mut p.body);
        }
    }

    /// Visits every span in the tree.
    pub fn for_each_span(&self, f: &mut impl FnMut(&SourceSpan)) {
        f(&self.span);
        f(&self.name.span);
        for imp in &self.type_imports {
            f(&imp.span);
            f(&imp.target_tag.span);
            f(&imp.alias.span);
        }
        for p in &self.protocols {
            f(&p.span);
            f(&p.name.span);
            p.roles.iter().for_each(|r| f(&r.span));
            body_spans(&p.body, f);
        }
    }
}

fn clear(id: &mut Ident) {
    id.span = SourceSpan::dummy();
}

fn clear_body(body: &mut GBody) {
    for stmt in body {
        match stmt {
            GStatement::Message(m) => {
                clear(&mut m.label);
                clear(&mut m.from);
                clear(&mut m.to);
                m.payloads.iter_mut().for_each(|p| clear(&mut p.name));
                m.span = SourceSpan::dummy();
            }
            GStatement::Choice(c) => {
                clear(&mut c.at);
                c.span = SourceSpan::dummy();
                c.branches.iter_mut().for_each(clear_body);
            }
            GStatement::Do(d) => {
                clear(&mut d.target);
                d.role_args.iter_mut().for_each(clear);
                d.span = SourceSpan::dummy();
            }
        }
    }
}

fn body_spans(body: &GBody, f: &mut impl FnMut(&SourceSpan)) {
    for stmt in body {
        f(stmt.span());
        match stmt {
            GStatement::Message(m) => {
                f(&m.label.span);
                f(&m.from.span);
                f(&m.to.span);
                m.payloads.iter().for_each(|p| f(&p.name.span));
            }
            GStatement::Choice(c) => {
                f(&c.at.span);
                c.branches.iter().for_each(|b| body_spans(b, f));
            }
            GStatement::Do(d) => {
                f(&d.target.span);
                d.role_args.iter().for_each(|r| f(&r.span));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Primitive {
    Int,
    String,
    Bool,
}

impl Primitive {
    pub const ALL: [Primitive; 3] = [Primitive::Int, Primitive::String, Primitive::Bool];

    pub fn from_name(name: &str) -> Option<Primitive> {
        match name {
            "int" => Some(Primitive::Int),
            "string" => Some(Primitive::String),
            "bool" => Some(Primitive::Bool),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Int => "int",
            Primitive::String => "string",
            Primitive::Bool => "bool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResolvedType {
    Primitive(Primitive),
    Imported(TypeImport),
}

/// Resolves a payload name against the built-in primitives and the module's
/// type imports. Primitives take precedence; the checker rejects imports
/// whose alias shadows a primitive.
pub fn resolve_payload(payload: &PayloadRef, module: &Module) -> Result<ResolvedType, Diagnostic> {
    let name = payload.name.as_str();
    if let Some(p) = Primitive::from_name(name) {
        return Ok(ResolvedType::Primitive(p));
    }
    match module.import(name) {
        Some(imp) => Ok(ResolvedType::Imported(imp.clone())),
        None => Err(Diagnostic::error(
            DiagnosticCode::UnknownType,
            payload.name.span.clone(),
            format!("unknown payload type `{name}`"),
        )),
    }
}
