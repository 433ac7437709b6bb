//! Tokenizer. `//` line comments and whitespace are skipped; every other
//! character must start a keyword, identifier, string literal or punctuation.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::diagnostic::{Diagnostic, DiagnosticCode};
use crate::span::{Position, SourceSpan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Keyword {
    Module,
    Type,
    From,
    To,
    As,
    Global,
    Protocol,
    Role,
    Choice,
    At,
    Or,
    Do,
}

impl Keyword {
    pub const ALL: [Keyword; 12] = [
        Keyword::Module,
        Keyword::Type,
        Keyword::From,
        Keyword::To,
        Keyword::As,
        Keyword::Global,
        Keyword::Protocol,
        Keyword::Role,
        Keyword::Choice,
        Keyword::At,
        Keyword::Or,
        Keyword::Do,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Module => "module",
            Keyword::Type => "type",
            Keyword::From => "from",
            Keyword::To => "to",
            Keyword::As => "as",
            Keyword::Global => "global",
            Keyword::Protocol => "protocol",
            Keyword::Role => "role",
            Keyword::Choice => "choice",
            Keyword::At => "at",
            Keyword::Or => "or",
            Keyword::Do => "do",
        }
    }

    pub fn lookup(s: &str) -> Option<Keyword> {
        Keyword::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

pub fn is_keyword(s: &str) -> bool {
    Keyword::lookup(s).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Keyword(Keyword),
    Identifier,
    /// Carries the unescaped contents.
    StringLiteral(String),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Exact source text, including quotes for string literals.
    pub text: String,
    pub span: SourceSpan,
    /// Byte range of `text` in the input.
    pub range: Range<usize>,
}

impl Token {
    pub fn is_keyword(&self, kw: Keyword) -> bool {
        self.kind == TokenKind::Keyword(kw)
    }

    pub fn is_punct(&self, c: char) -> bool {
        self.kind == TokenKind::Punct(c)
    }
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "keyword `{}`", k.as_str()),
            TokenKind::Identifier => f.write_str("identifier"),
            TokenKind::StringLiteral(_) => f.write_str("string literal"),
            TokenKind::Punct(c) => write!(f, "`{c}`"),
        }
    }
}

const PUNCTUATION: &[char] = &[';', ',', '(', ')', '{', '}', '<', '>', '.'];

/// Tokenizes `text`, stopping at the first lexical error.
pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let (tokens, mut errors) = lex("<input>", text);
    if errors.is_empty() {
        Ok(tokens)
    } else {
        Err(errors.swap_remove(0))
    }
}

/// Tokenizes all of `text`, skipping over bad characters and collecting
/// one diagnostic for each.
pub fn lex(file: &str, text: &str) -> (Vec<Token>, Vec<Diagnostic>) {
    let mut lexer = Lexer {
        file: Arc::from(file),
        text,
        offset: 0,
        pos: Position::START,
        tokens: Vec::new(),
        errors: Vec::new(),
    };
    lexer.run();
    (lexer.tokens, lexer.errors)
}

struct Lexer<'a> {
    file: Arc<str>,
    text: &'a str,
    offset: usize,
    pos: Position,
    tokens: Vec<Token>,
    errors: Vec<Diagnostic>,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.text[self.offset..].chars().next()
    }

    fn peek_second(&self) -> Option<char> {
        let mut it = self.text[self.offset..].chars();
        it.next();
        it.next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.offset += c.len_utf8();
        if c == '\n' {
            self.pos.line += 1;
            self.pos.col = 1;
        } else {
            self.pos.col += 1;
        }
        Some(c)
    }

    fn span_from(&self, start: Position) -> SourceSpan {
        SourceSpan::new(self.file.clone(), start, self.pos)
    }

    fn push(&mut self, kind: TokenKind, start_offset: usize, start: Position) {
        self.tokens.push(Token {
            kind,
            text: self.text[start_offset..self.offset].to_owned(),
            span: self.span_from(start),
            range: start_offset..self.offset,
        });
    }

    fn run(&mut self) {
        while let Some(c) = self.peek() {
            let start_offset = self.offset;
            let start = self.pos;
            if c.is_whitespace() {
                self.bump();
            } else if c == '/' && self.peek_second() == Some('/') {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else if c.is_ascii_alphabetic() || c == '_' {
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '_') {
                    self.bump();
                }
                let word = &self.text[start_offset..self.offset];
                let kind = match Keyword::lookup(word) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Identifier,
                };
                self.push(kind, start_offset, start);
            } else if c == '"' {
                self.string(start_offset, start);
            } else if PUNCTUATION.contains(&c) {
                self.bump();
                self.push(TokenKind::Punct(c), start_offset, start);
            } else {
                self.bump();
                self.errors.push(Diagnostic::error(
                    DiagnosticCode::UnexpectedCharacter,
                    self.span_from(start),
                    format!("unexpected character `{}`", c.escape_debug()),
                ));
            }
        }
    }

    fn string(&mut self, start_offset: usize, start: Position) {
        self.bump();
        let mut value = String::new();
        loop {
            match self.peek() {
                None | Some('\n') => {
                    self.errors.push(Diagnostic::error(
                        DiagnosticCode::UnterminatedString,
                        self.span_from(start),
                        "unterminated string literal",
                    ));
                    return;
                }
                Some('"') => {
                    self.bump();
                    self.push(TokenKind::StringLiteral(value), start_offset, start);
                    return;
                }
                Some('\\') => {
                    let esc_start = self.pos;
                    self.bump();
                    match self.peek() {
                        Some(c @ ('"' | '\\')) => {
                            self.bump();
                            value.push(c);
                        }
                        Some('\n') | None => {}
                        Some(c) => {
                            self.bump();
                            self.errors.push(Diagnostic::error(
                                DiagnosticCode::UnexpectedCharacter,
                                self.span_from(esc_start),
                                format!("unknown escape sequence `\\{}`", c.escape_debug()),
                            ));
                        }
                    }
                }
                Some(c) => {
                    self.bump();
                    value.push(c);
                }
            }
        }
    }
}

/// Renders `s` as a string literal accepted by the lexer.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}
