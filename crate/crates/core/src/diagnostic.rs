use std::fmt;

use crate::span::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// Machine-readable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    // lexing / parsing
    InvalidEncoding,
    UnexpectedCharacter,
    UnterminatedString,
    UnexpectedToken,
    UnexpectedEof,
    UnsupportedParameter,
    NestingTooDeep,
    // names and types
    UnknownType,
    DuplicateImport,
    InvalidImportAlias,
    DuplicateProtocol,
    DuplicateRole,
    TooFewRoles,
    UnknownRole,
    UnknownProtocol,
    // statements
    SelfCommunication,
    NonTailDo,
    ArityMismatch,
    DuplicateRoleArgument,
    // projection
    MergeError,
    NonDirectedChoice,
    UnguardedRecursion,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::InvalidEncoding => "InvalidEncoding",
            DiagnosticCode::UnexpectedCharacter => "UnexpectedCharacter",
            DiagnosticCode::UnterminatedString => "UnterminatedString",
            DiagnosticCode::UnexpectedToken => "UnexpectedToken",
            DiagnosticCode::UnexpectedEof => "UnexpectedEof",
            DiagnosticCode::UnsupportedParameter => "UnsupportedParameter",
            DiagnosticCode::NestingTooDeep => "NestingTooDeep",
            DiagnosticCode::UnknownType => "UnknownType",
            DiagnosticCode::DuplicateImport => "DuplicateImport",
            DiagnosticCode::InvalidImportAlias => "InvalidImportAlias",
            DiagnosticCode::DuplicateProtocol => "DuplicateProtocol",
            DiagnosticCode::DuplicateRole => "DuplicateRole",
            DiagnosticCode::TooFewRoles => "TooFewRoles",
            DiagnosticCode::UnknownRole => "UnknownRole",
            DiagnosticCode::UnknownProtocol => "UnknownProtocol",
            DiagnosticCode::SelfCommunication => "SelfCommunication",
            DiagnosticCode::NonTailDo => "NonTailDo",
            DiagnosticCode::ArityMismatch => "ArityMismatch",
            DiagnosticCode::DuplicateRoleArgument => "DuplicateRoleArgument",
            DiagnosticCode::MergeError => "MergeError",
            DiagnosticCode::NonDirectedChoice => "NonDirectedChoice",
            DiagnosticCode::UnguardedRecursion => "UnguardedRecursion",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A located error or warning. Rendered as `file:line:col: severity[code]: message`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub message: String,
    pub span: SourceSpan,
}

impl Diagnostic {
    pub fn error(code: DiagnosticCode, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn warning(code: DiagnosticCode, span: SourceSpan, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            code,
            message: message.into(),
            span,
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}[{}]: {}",
            self.span.file,
            self.span.line_start,
            self.span.col_start,
            self.severity,
            self.code,
            self.message
        )
    }
}

impl std::error::Error for Diagnostic {}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::span::Position;
    use std::sync::Arc;

    #[test]
    fn renders_in_compiler_format() {
        let span = SourceSpan::new(
            Arc::from("game.scr"),
            Position { line: 5, col: 3 },
            Position { line: 5, col: 7 },
        );
        let d = Diagnostic::error(
            DiagnosticCode::UnknownRole,
            span,
            "role `Z` is not declared",
        );
        assert_eq!(
            d.to_string(),
            "game.scr:5:3: error[UnknownRole]: role `Z` is not declared"
        );
    }
}
