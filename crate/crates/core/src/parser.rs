//! Recursive-descent parser for the protocol language.
//!
//! Grammar:
//!
//! ```text
//! module    = "module" dotted ";" import* protocol*
//! dotted    = IDENT ("." IDENT)*
//! import    = "type" "<" IDENT ">" STRING "from" STRING "as" IDENT ";"
//! protocol  = "global" "protocol" IDENT "(" param ("," param)* ")" "{" body "}"
//! param     = "role" IDENT
//! body      = stmt*
//! stmt      = message | choice | do
//! message   = IDENT "(" (IDENT ("," IDENT)*)? ")" "from" IDENT "to" IDENT ";"
//! choice    = "choice" "at" IDENT "{" body "}" ("or" "{" body "}")*
//! do        = "do" IDENT "(" (IDENT ("," IDENT)*)? ")" ";"
//! ```
//!
//! Errors are recovered at statement and declaration boundaries, so one run
//! reports every independent syntax error. A missing `or` between two choice
//! branches is reported once and the second branch is parsed as if the
//! keyword were present.

use std::sync::Arc;

use crate::ast::*;
use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::lexer::{lex, Keyword, Token, TokenKind};
use crate::span::{Position, SourceSpan};

const MAX_NESTING: usize = 64;

/// Parses source text, labelling spans with a placeholder file name.
pub fn parse_module(text: &str) -> Result<Module, Vec<Diagnostic>> {
    parse_source("<input>", text)
}

pub fn parse_source(file: &str, text: &str) -> Result<Module, Vec<Diagnostic>> {
    let (tokens, mut diags) = lex(file, text);
    let eof = end_position(text);
    let mut parser = Parser {
        file: Arc::from(file),
        tokens,
        pos: 0,
        diags: Vec::new(),
        eof,
        depth: 0,
    };
    let module = parser.module();
    // An unterminated string swallows the rest of its line, so anything the
    // parser reports after it is a consequence, not a separate mistake.
    let swallowed = diags
        .iter()
        .filter(|d| d.code == DiagnosticCode::UnterminatedString)
        .map(|d| d.span.start())
        .min();
    diags.extend(
        parser
            .diags
            .into_iter()
            .filter(|d| swallowed.is_none_or(|at| d.span.start() < at)),
    );
    match module {
        Some(m) if diags.is_empty() => Ok(m),
        _ => {
            diags.sort_by_key(|d| (d.span.start(), d.span.end()));
            Err(diags)
        }
    }
}

/// Like [`parse_source`] for raw bytes; invalid UTF-8 is a diagnostic.
pub fn parse_bytes(file: &str, bytes: &[u8]) -> Result<Module, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_source(file, text),
        Err(e) => {
            let prefix = std::str::from_utf8(&bytes[..e.valid_up_to()]).unwrap_or_default();
            let at = end_position(prefix);
            let end = Position {
                line: at.line,
                col: at.col + 1,
            };
            Err(vec![Diagnostic::error(
                DiagnosticCode::InvalidEncoding,
                SourceSpan::new(Arc::from(file), at, end),
                "input is not valid UTF-8",
            )])
        }
    }
}

fn end_position(text: &str) -> Position {
    let mut pos = Position::START;
    for c in text.chars() {
        if c == '\n' {
            pos.line += 1;
            pos.col = 1;
        } else {
            pos.col += 1;
        }
    }
    pos
}

/// Marker: a diagnostic has been recorded and the caller should resynchronize.
struct Recover;

type PResult<T> = Result<T, Recover>;

struct Parser {
    file: Arc<str>,
    tokens: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
    eof: Position,
    depth: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_kw(&self, kw: Keyword) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().is_some_and(|t| t.is_punct(c))
    }

    fn eof_span(&self) -> SourceSpan {
        SourceSpan::new(self.file.clone(), self.eof, self.eof)
    }

    fn prev_span(&self) -> SourceSpan {
        match self.pos.checked_sub(1).and_then(|i| self.tokens.get(i)) {
            Some(t) => t.span.clone(),
            None => SourceSpan::new(self.file.clone(), Position::START, Position::START),
        }
    }

    /// Records "expected X" at the current token (or end of input).
    fn error_expected(&mut self, expected: &str) -> Recover {
        let diag = match self.peek() {
            Some(t) => Diagnostic::error(
                DiagnosticCode::UnexpectedToken,
                t.span.clone(),
                format!("expected {expected}, found {} `{}`", describe(t), t.text),
            ),
            None => Diagnostic::error(
                DiagnosticCode::UnexpectedEof,
                self.eof_span(),
                format!("expected {expected}, found end of input"),
            ),
        };
        self.diags.push(diag);
        Recover
    }

    fn expect_punct(&mut self, c: char) -> PResult<Token> {
        if self.at_punct(c) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.error_expected(&format!("`{c}`")))
        }
    }

    fn expect_kw(&mut self, kw: Keyword) -> PResult<Token> {
        if self.at_kw(kw) {
            Ok(self.bump().unwrap())
        } else {
            Err(self.error_expected(&format!("`{}`", kw.as_str())))
        }
    }

    fn expect_ident(&mut self, what: &str) -> PResult<Ident> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => {
                let t = self.bump().unwrap();
                Ok(Ident::new(t.text, t.span))
            }
            _ => Err(self.error_expected(what)),
        }
    }

    fn expect_string(&mut self, what: &str) -> PResult<String> {
        match self.peek().map(|t| &t.kind) {
            Some(TokenKind::StringLiteral(s)) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.error_expected(what)),
        }
    }

    /// Skips to just past the next `;`, or to (not past) a `}` closing the
    /// enclosing block. Balanced `{ ... }` groups are skipped whole.
    fn sync_statement(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if t.is_punct(';') && depth == 0 {
                self.bump();
                return;
            }
            if t.is_punct('}') {
                if depth == 0 {
                    return;
                }
                depth -= 1;
                self.bump();
                if depth == 0 {
                    return;
                }
                continue;
            }
            if t.is_punct('{') {
                depth += 1;
            }
            self.bump();
        }
    }

    /// Skips to the next top-level `type` or `global` keyword.
    fn sync_item(&mut self) {
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if depth == 0 && (t.is_keyword(Keyword::Type) || t.is_keyword(Keyword::Global)) {
                return;
            }
            if t.is_punct('{') {
                depth += 1;
            } else if t.is_punct('}') {
                depth = depth.saturating_sub(1);
            }
            self.bump();
        }
    }

    fn module(&mut self) -> Option<Module> {
        let start = self
            .peek()
            .map(|t| t.span.clone())
            .unwrap_or_else(|| self.eof_span());
        let name = match self.module_header() {
            Ok(name) => Some(name),
            Err(Recover) => {
                self.sync_item();
                None
            }
        };
        let mut type_imports = Vec::new();
        let mut protocols = Vec::new();
        while let Some(t) = self.peek() {
            if t.is_keyword(Keyword::Type) {
                match self.import() {
                    Ok(imp) => type_imports.push(imp),
                    Err(Recover) => self.sync_item(),
                }
            } else if t.is_keyword(Keyword::Global) {
                match self.protocol() {
                    Ok(p) => protocols.push(p),
                    Err(Recover) => self.sync_item(),
                }
            } else {
                self.error_expected("`type` or `global protocol`");
                self.bump();
                self.sync_item();
            }
        }
        let span = start.to(&self.prev_span());
        Some(Module {
            name: name?,
            type_imports,
            protocols,
            span,
        })
    }

    fn module_header(&mut self) -> PResult<Ident> {
        self.expect_kw(Keyword::Module)?;
        let first = self.expect_ident("module name")?;
        let mut name = first.name;
        let mut span = first.span;
        while self.at_punct('.') {
            self.bump();
            let part = self.expect_ident("module name segment")?;
            name.push('.');
            name.push_str(&part.name);
            span = span.to(&part.span);
        }
        self.expect_punct(';')?;
        Ok(Ident::new(name, span))
    }

    fn import(&mut self) -> PResult<TypeImport> {
        let start = self.expect_kw(Keyword::Type)?.span;
        self.expect_punct('<')?;
        let target_tag = self.expect_ident("type target tag")?;
        self.expect_punct('>')?;
        let external_name = self.expect_string("external type name string")?;
        self.expect_kw(Keyword::From)?;
        let source_path = self.expect_string("source path string")?;
        self.expect_kw(Keyword::As)?;
        let alias = self.expect_ident("type alias")?;
        let end = self.expect_punct(';')?.span;
        Ok(TypeImport {
            target_tag,
            external_name,
            source_path,
            alias,
            span: start.to(&end),
        })
    }

    fn protocol(&mut self) -> PResult<GlobalProtocol> {
        let start = self.expect_kw(Keyword::Global)?.span;
        self.expect_kw(Keyword::Protocol)?;
        let name = self.expect_ident("protocol name")?;
        self.expect_punct('(')?;
        let mut roles = Vec::new();
        if !self.at_punct(')') {
            loop {
                if let Some(role) = self.parameter()? {
                    roles.push(role);
                }
                if self.at_punct(',') {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(')')?;
        self.expect_punct('{')?;
        let body = self.body()?;
        let end = self.expect_punct('}')?.span;
        Ok(GlobalProtocol {
            name,
            roles,
            body,
            span: start.to(&end),
        })
    }

    /// `role X`; any other parameter form is reported and skipped.
    fn parameter(&mut self) -> PResult<Option<Ident>> {
        if self.at_kw(Keyword::Role) {
            self.bump();
            return self.expect_ident("role name").map(Some);
        }
        let Some(first) = self.peek().cloned() else {
            return Err(self.error_expected("`role`"));
        };
        if first.is_punct(')') || first.is_punct(',') || first.is_punct('{') {
            return Err(self.error_expected("`role`"));
        }
        let mut span = first.span.clone();
        while let Some(t) = self.peek() {
            if t.is_punct(',') || t.is_punct(')') || t.is_punct('{') || t.is_punct('}') {
                break;
            }
            span = span.to(&t.span);
            self.bump();
        }
        self.diags.push(Diagnostic::error(
            DiagnosticCode::UnsupportedParameter,
            span,
            "only `role` parameters are supported",
        ));
        Ok(None)
    }

    /// Statements up to (not including) the closing `}`.
    fn body(&mut self) -> PResult<GBody> {
        let mut stmts = Vec::new();
        loop {
            match self.peek() {
                None => return Err(self.error_expected("`}`")),
                Some(t) if t.is_punct('}') => return Ok(stmts),
                Some(_) => match self.statement() {
                    Ok(s) => stmts.push(s),
                    Err(Recover) => self.sync_statement(),
                },
            }
        }
    }

    fn statement(&mut self) -> PResult<GStatement> {
        let Some(t) = self.peek() else {
            return Err(self.error_expected("statement"));
        };
        match &t.kind {
            TokenKind::Identifier => self.message().map(GStatement::Message),
            TokenKind::Keyword(Keyword::Choice) => self.choice().map(GStatement::Choice),
            TokenKind::Keyword(Keyword::Do) => self.do_call().map(GStatement::Do),
            _ => {
                let r = self.error_expected("message, `choice` or `do`");
                Err(r)
            }
        }
    }

    fn name_list(&mut self, what: &str) -> PResult<Vec<Ident>> {
        self.expect_punct('(')?;
        let mut items = Vec::new();
        if !self.at_punct(')') {
            loop {
                items.push(self.expect_ident(what)?);
                if self.at_punct(',') {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(')')?;
        Ok(items)
    }

    fn message(&mut self) -> PResult<MessageTransfer> {
        let label = self.expect_ident("message label")?;
        let payloads = self
            .name_list("payload type")?
            .into_iter()
            .map(|name| PayloadRef { name })
            .collect();
        self.expect_kw(Keyword::From)?;
        let from = self.expect_ident("sender role")?;
        self.expect_kw(Keyword::To)?;
        let to = self.expect_ident("receiver role")?;
        let end = self.expect_punct(';')?.span;
        let span = label.span.to(&end);
        Ok(MessageTransfer {
            label,
            payloads,
            from,
            to,
            span,
        })
    }

    fn choice(&mut self) -> PResult<Choice> {
        let start = self.expect_kw(Keyword::Choice)?.span;
        if self.depth >= MAX_NESTING {
            self.diags.push(Diagnostic::error(
                DiagnosticCode::NestingTooDeep,
                start,
                format!("choices nested deeper than {MAX_NESTING} levels"),
            ));
            return Err(Recover);
        }
        self.expect_kw(Keyword::At)?;
        let at = self.expect_ident("deciding role")?;
        self.depth += 1;
        let result = self.choice_branches();
        self.depth -= 1;
        let (branches, end) = result?;
        Ok(Choice {
            at,
            branches,
            span: start.to(&end),
        })
    }

    fn choice_branches(&mut self) -> PResult<(Vec<GBody>, SourceSpan)> {
        let mut branches = Vec::new();
        self.expect_punct('{')?;
        branches.push(self.body()?);
        let mut end = self.expect_punct('}')?.span;
        loop {
            if self.at_kw(Keyword::Or) {
                self.bump();
                self.expect_punct('{')?;
            } else if self.at_punct('{') {
                self.error_expected("`or` between choice branches");
                self.bump();
            } else {
                break;
            }
            branches.push(self.body()?);
            end = self.expect_punct('}')?.span;
        }
        Ok((branches, end))
    }

    fn do_call(&mut self) -> PResult<DoCall> {
        let start = self.expect_kw(Keyword::Do)?.span;
        let target = self.expect_ident("protocol name")?;
        let role_args = self.name_list("role argument")?;
        let end = self.expect_punct(';')?.span;
        Ok(DoCall {
            target,
            role_args,
            span: start.to(&end),
        })
    }
}

fn describe(t: &Token) -> &'static str {
    match t.kind {
        TokenKind::Keyword(_) => "keyword",
        TokenKind::Identifier => "identifier",
        TokenKind::StringLiteral(_) => "string",
        TokenKind::Punct(_) => "token",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const GAME: &str = include_str!("../tests/fixtures/game.scr");

    fn stmt_labels(body: &GBody) -> Vec<String> {
        body.iter()
            .map(|s| match s {
                GStatement::Message(m) => m.label.name.clone(),
                GStatement::Choice(_) => "choice".into(),
                GStatement::Do(d) => format!("do {}", d.target),
            })
            .collect()
    }

    #[test]
    fn parses_the_game() {
        let m = parse_source("game.scr", GAME).unwrap();
        assert_eq!(m.name.name, "NoughtsAndCrosses");
        assert_eq!(m.type_imports.len(), 1);
        let imp = &m.type_imports[0];
        assert_eq!(imp.target_tag.name, "typescript");
        assert_eq!(imp.external_name, "Coordinate");
        assert_eq!(imp.source_path, "./Types");
        assert_eq!(imp.alias.name, "Point");
        assert_eq!(m.protocols.len(), 1);
        let g = &m.protocols[0];
        let roles: Vec<_> = g.roles.iter().map(|r| r.as_str()).collect();
        assert_eq!(roles, ["Svr", "P1", "P2"]);
        assert_eq!(stmt_labels(&g.body), ["Pos", "choice"]);
        let GStatement::Choice(c) = &g.body[1] else {
            panic!()
        };
        assert_eq!(c.at.name, "Svr");
        assert_eq!(c.branches.len(), 3);
        assert_eq!(stmt_labels(&c.branches[0]), ["Lose", "Win"]);
        assert_eq!(stmt_labels(&c.branches[1]), ["Draw", "Draw"]);
        assert_eq!(stmt_labels(&c.branches[2]), ["Update", "Update", "do Game"]);
        let GStatement::Do(d) = &c.branches[2][2] else {
            panic!()
        };
        let args: Vec<_> = d.role_args.iter().map(|r| r.as_str()).collect();
        assert_eq!(args, ["Svr", "P2", "P1"]);
    }

    #[test]
    fn minimal_protocol() {
        let m = parse_module("module M; global protocol P(role A, role B) { X(int) from A to B; }")
            .unwrap();
        let p = &m.protocols[0];
        assert_eq!(p.roles.len(), 2);
        let GStatement::Message(msg) = &p.body[0] else {
            panic!()
        };
        assert_eq!(msg.label.name, "X");
        assert_eq!(msg.payloads[0].name.name, "int");
        assert_eq!((msg.from.as_str(), msg.to.as_str()), ("A", "B"));
        assert_eq!((msg.span.col_start, msg.span.col_end), (47, 66));
    }

    #[test]
    fn missing_or_is_one_error_at_the_brace() {
        let text = GAME.replacen("} or {", "} {", 1);
        let errs = parse_source("game.scr", &text).unwrap_err();
        assert_eq!(errs.len(), 1, "{errs:?}");
        let e = &errs[0];
        assert_eq!(e.code, DiagnosticCode::UnexpectedToken);
        // line 8 is `  } {` after the edit; the second brace sits in column 5.
        assert_eq!((e.span.line_start, e.span.col_start), (8, 5));
        assert_eq!((e.span.line_end, e.span.col_end), (8, 6));
    }

    #[test]
    fn reports_independent_errors() {
        let text = "module M;\n\
                    global protocol P(role A, role B) {\n\
                    X(int) from A B;\n\
                    Y(int) from A to B;\n\
                    Z(int from B to A;\n\
                    }\n";
        let errs = parse_module(text).unwrap_err();
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert_eq!(errs[0].span.line_start, 3);
        assert_eq!(errs[1].span.line_start, 5);
    }

    #[test]
    fn non_role_parameter_rejected() {
        let errs =
            parse_module("module M; global protocol P(role A, sig X, role B) { }").unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].code, DiagnosticCode::UnsupportedParameter);
        assert_eq!((errs[0].span.col_start, errs[0].span.col_end), (37, 42));
    }

    #[test]
    fn truncated_input_reports_eof() {
        let errs = parse_module("module M; global protocol P(role A, role B) {").unwrap_err();
        assert_eq!(errs.last().unwrap().code, DiagnosticCode::UnexpectedEof);
    }

    #[test]
    fn empty_module() {
        let m = parse_module("module X;").unwrap();
        assert!(m.protocols.is_empty() && m.type_imports.is_empty());
    }

    #[test]
    fn dotted_module_name() {
        let m = parse_module("module a.b.c;").unwrap();
        assert_eq!(m.name.name, "a.b.c");
    }

    #[test]
    fn invalid_utf8() {
        let errs = parse_bytes("x.scr", b"module \xff;").unwrap_err();
        assert_eq!(errs[0].code, DiagnosticCode::InvalidEncoding);
        assert_eq!(errs[0].span.col_start, 8);
    }

    #[test]
    fn deep_nesting_is_reported_not_overflowed() {
        let mut text = String::from("module M; global protocol P(role A, role B) {");
        for _ in 0..200 {
            text.push_str("choice at A {");
        }
        for _ in 0..200 {
            text.push('}');
        }
        text.push('}');
        let errs = parse_module(&text).unwrap_err();
        assert!(errs
            .iter()
            .any(|d| d.code == DiagnosticCode::NestingTooDeep));
    }

    #[test]
    fn statement_spans_cover_choice() {
        let m = parse_module(GAME).unwrap();
        let c = m.protocols[0].body[1].span();
        assert_eq!((c.line_start, c.col_start), (6, 3));
        assert_eq!((c.line_end, c.col_end), (13, 4));
    }
}
