//! Compiler toolchain for multiparty session protocols written in a subset
//! of Scribble.
//!
//! Pipeline: [`parser`] → [`check`] / [`project`] → [`efsm`] → [`verify`] and
//! [`codegen`]. Generated server and browser APIs speak the JSON frame
//! protocol in [`wire`].

pub mod ast;
pub mod check;
pub mod codegen;
pub mod diagnostic;
pub mod efsm;
pub mod lexer;
pub mod local;
pub mod parser;
pub mod pretty;
pub mod project;
pub mod span;
pub mod verify;
pub mod wire;

pub use ast::{resolve_payload, Module, RoleName};
pub use check::check_well_formed;
pub use diagnostic::{Diagnostic, DiagnosticCode, Severity};
pub use efsm::{build_efsm, Efsm};
pub use parser::{parse_module, parse_source};
pub use pretty::pretty_print;
pub use project::project;
pub use span::SourceSpan;
