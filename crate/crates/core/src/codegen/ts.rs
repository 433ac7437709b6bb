//! Just enough TypeScript lexing to check generated bundles: which names a
//! file declares, imports and exports, and which members are public.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::SourceBundle;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Str(String),
    Punct(char),
    Other,
}

fn lex(src: &str) -> Vec<Tok> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                i += 1;
            }
            i += 2;
        } else if c == '"' || c == '\'' || c == '`' {
            let mut s = String::new();
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' {
                    i += 1;
                }
                if let Some(&ch) = chars.get(i) {
                    s.push(ch);
                }
                i += 1;
            }
            i += 1;
            out.push(Tok::Str(s));
        } else if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '#' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric()
                    || chars[i] == '_'
                    || chars[i] == '$'
                    || chars[i] == '#')
            {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.') {
                i += 1;
            }
            out.push(Tok::Other);
        } else {
            out.push(Tok::Punct(c));
            i += 1;
        }
    }
    out
}

fn ident(t: Option<&Tok>) -> Option<&str> {
    match t {
        Some(Tok::Ident(s)) => Some(s),
        _ => None,
    }
}

const DECL_KEYWORDS: &[&str] = &[
    "type",
    "interface",
    "class",
    "enum",
    "function",
    "const",
    "let",
    "var",
];

#[derive(Debug, Default)]
struct FileInfo {
    declared: BTreeSet<String>,
    exported: BTreeSet<String>,
    /// `export * from "path"`.
    star_exports: Vec<String>,
    /// Local name → (path, imported name).
    imports: BTreeMap<String, (String, String)>,
    referenced: BTreeSet<String>,
}

fn analyze(src: &str) -> FileInfo {
    let toks = lex(src);
    let mut info = FileInfo::default();
    let mut i = 0;
    while i < toks.len() {
        match ident(toks.get(i)) {
            Some("import") => {
                i = parse_import(&toks, i + 1, &mut info);
                continue;
            }
            Some("export") => {
                i = parse_export(&toks, i + 1, &mut info);
                continue;
            }
            Some(kw) if DECL_KEYWORDS.contains(&kw) => {
                if let Some(name) = ident(toks.get(i + 1)) {
                    // `type` is also a modifier in `import type` / `export type {`.
                    if !(kw == "type" && matches!(toks.get(i + 2), Some(Tok::Punct('{')))) {
                        info.declared.insert(name.to_owned());
                    }
                }
            }
            Some(name) => {
                // `x.Name` is a member and `Name: ...` a key, not references.
                let member_access = i > 0 && toks[i - 1] == Tok::Punct('.');
                let key = matches!(toks.get(i + 1), Some(Tok::Punct(':')));
                if !member_access && !key {
                    info.referenced.insert(name.to_owned());
                }
            }
            None => {}
        }
        i += 1;
    }
    info
}

/// Parses `{ a as b, c } from "path"` after `import [type]`.
fn parse_import(toks: &[Tok], mut i: usize, info: &mut FileInfo) -> usize {
    if ident(toks.get(i)) == Some("type") {
        i += 1;
    }
    let mut names = Vec::new();
    if toks.get(i) == Some(&Tok::Punct('{')) {
        i += 1;
        while i < toks.len() && toks[i] != Tok::Punct('}') {
            if let Some(name) = ident(toks.get(i)) {
                if name == "type" && ident(toks.get(i + 1)).is_some() {
                    i += 1;
                    continue;
                }
                if ident(toks.get(i + 1)) == Some("as") {
                    if let Some(local) = ident(toks.get(i + 2)) {
                        names.push((local.to_owned(), name.to_owned()));
                        i += 3;
                        continue;
                    }
                }
                names.push((name.to_owned(), name.to_owned()));
            }
            i += 1;
        }
        i += 1;
    } else if let Some(name) = ident(toks.get(i)) {
        // Default import or `* as Name`.
        names.push((name.to_owned(), "default".to_owned()));
        i += 1;
    } else if toks.get(i) == Some(&Tok::Punct('*')) {
        if let Some(name) = ident(toks.get(i + 2)) {
            names.push((name.to_owned(), "*".to_owned()));
        }
        i += 3;
    }
    if ident(toks.get(i)) == Some("from") {
        if let Some(Tok::Str(path)) = toks.get(i + 1) {
            for (local, original) in names {
                info.imports.insert(local, (path.clone(), original));
            }
            return i + 2;
        }
    }
    i
}

fn parse_export(toks: &[Tok], mut i: usize, info: &mut FileInfo) -> usize {
    while matches!(
        ident(toks.get(i)),
        Some("abstract" | "default" | "declare" | "async")
    ) {
        i += 1;
    }
    if ident(toks.get(i)) == Some("type") && toks.get(i + 1) == Some(&Tok::Punct('{')) {
        i += 1;
    }
    match toks.get(i) {
        Some(Tok::Punct('{')) => {
            let mut j = i + 1;
            let mut names = Vec::new();
            while j < toks.len() && toks[j] != Tok::Punct('}') {
                if let Some(name) = ident(toks.get(j)) {
                    if ident(toks.get(j + 1)) == Some("as") {
                        if let Some(public) = ident(toks.get(j + 2)) {
                            names.push((public.to_owned(), name.to_owned()));
                            j += 3;
                            continue;
                        }
                    }
                    names.push((name.to_owned(), name.to_owned()));
                }
                j += 1;
            }
            j += 1;
            let from = if ident(toks.get(j)) == Some("from") {
                match toks.get(j + 1) {
                    Some(Tok::Str(p)) => {
                        j += 2;
                        Some(p.clone())
                    }
                    _ => None,
                }
            } else {
                None
            };
            for (public, original) in names {
                if let Some(path) = &from {
                    info.imports
                        .insert(format!("{public} (re-export)"), (path.clone(), original));
                }
                info.exported.insert(public);
            }
            j
        }
        Some(Tok::Punct('*')) => {
            if ident(toks.get(i + 1)) == Some("as") {
                if let (Some(name), Some(Tok::Str(path))) =
                    (ident(toks.get(i + 2)), toks.get(i + 4))
                {
                    info.exported.insert(name.to_owned());
                    info.imports.insert(
                        format!("{name} (re-export)"),
                        (path.clone(), "*".to_owned()),
                    );
                }
                i + 5
            } else {
                if let Some(Tok::Str(path)) = toks.get(i + 2) {
                    info.star_exports.push(path.clone());
                }
                i + 3
            }
        }
        Some(Tok::Ident(kw)) if DECL_KEYWORDS.contains(&kw.as_str()) => {
            if let Some(name) = ident(toks.get(i + 1)) {
                info.exported.insert(name.to_owned());
                info.declared.insert(name.to_owned());
            }
            i + 2
        }
        _ => i,
    }
}

/// Resolves a relative import to a bundle file.
fn resolve<'a>(files: &'a BTreeMap<String, String>, path: &str) -> Option<&'a str> {
    let stem = path.strip_prefix("./")?;
    ["ts", "tsx"]
        .iter()
        .map(|ext| format!("{stem}.{ext}"))
        .find_map(|f| files.get_key_value(&f).map(|(k, _)| k.as_str()))
}

fn exports_of(
    files: &BTreeMap<String, String>,
    file: &str,
    seen: &mut BTreeSet<String>,
) -> BTreeSet<String> {
    if !seen.insert(file.to_owned()) {
        return BTreeSet::new();
    }
    let info = analyze(&files[file]);
    let mut out = info.exported.clone();
    for path in &info.star_exports {
        if let Some(f) = resolve(files, path) {
            out.extend(exports_of(files, f, seen));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClosednessError {
    /// A state type is referenced but neither declared nor imported.
    UndefinedState { file: String, name: String },
    /// A bundle file imports a name its target file does not export.
    MissingExport {
        file: String,
        from: String,
        name: String,
    },
}

impl fmt::Display for ClosednessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClosednessError::UndefinedState { file, name } => {
                write!(f, "{file}: `{name}` is not defined")
            }
            ClosednessError::MissingExport { file, from, name } => {
                write!(f, "{file}: `{from}` does not export `{name}`")
            }
        }
    }
}

fn is_state_name(name: &str) -> bool {
    super::is_state_name(name)
}

/// Every state identifier used in a bundle file is defined in it or
/// imported from a bundle file that exports it.
pub fn check_closed(bundle: &SourceBundle) -> Result<(), Vec<ClosednessError>> {
    let mut errors = Vec::new();
    for (file, src) in &bundle.files {
        let info = analyze(src);
        for (path, original) in info.imports.values() {
            if let Some(target) = resolve(&bundle.files, path) {
                if original != "*"
                    && !exports_of(&bundle.files, target, &mut BTreeSet::new()).contains(original)
                {
                    errors.push(ClosednessError::MissingExport {
                        file: file.clone(),
                        from: path.clone(),
                        name: original.clone(),
                    });
                }
            }
        }
        for name in info.referenced.iter().filter(|n| is_state_name(n)) {
            if !info.declared.contains(name) && !info.imports.contains_key(name) {
                errors.push(ClosednessError::UndefinedState {
                    file: file.clone(),
                    name: name.clone(),
                });
            }
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// A callable or property reachable by user code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiItem {
    pub file: String,
    /// Enclosing exported declaration, if the item is a member.
    pub owner: Option<String>,
    pub name: String,
    /// Tokens of the declaration, space separated.
    pub signature: String,
}

impl fmt::Display for ApiItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.owner {
            Some(o) => write!(f, "{}: {o}.{}: {}", self.file, self.name, self.signature),
            None => write!(f, "{}: {}: {}", self.file, self.name, self.signature),
        }
    }
}

fn render(toks: &[Tok]) -> String {
    toks.iter()
        .map(|t| match t {
            Tok::Ident(s) => s.clone(),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Punct(c) => c.to_string(),
            Tok::Other => "0".to_owned(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

const MODIFIERS: &[&str] = &[
    "public", "readonly", "static", "abstract", "async", "declare", "override", "get", "set",
];

/// Exported declarations and the public members of exported classes,
/// interfaces and object types.
pub fn public_api(bundle: &SourceBundle) -> Vec<ApiItem> {
    let mut items = Vec::new();
    for (file, src) in &bundle.files {
        let toks = lex(src);
        let mut depth = 0usize;
        let mut i = 0;
        while i < toks.len() {
            match &toks[i] {
                Tok::Punct('{') => depth += 1,
                Tok::Punct('}') => depth = depth.saturating_sub(1),
                Tok::Ident(kw) if kw == "export" && depth == 0 => {
                    let mut j = i + 1;
                    while matches!(
                        ident(toks.get(j)),
                        Some("abstract" | "default" | "declare" | "async")
                    ) {
                        j += 1;
                    }
                    let kind = ident(toks.get(j)).unwrap_or("");
                    if !DECL_KEYWORDS.contains(&kind) || toks.get(j + 1) == Some(&Tok::Punct('{')) {
                        i += 1;
                        continue;
                    }
                    let Some(name) = ident(toks.get(j + 1)).map(str::to_owned) else {
                        i += 1;
                        continue;
                    };
                    let end = statement_end(&toks, j + 1);
                    let open = if matches!(kind, "class" | "interface" | "type") {
                        body_open(&toks, j + 1, end)
                    } else {
                        None
                    };
                    let header_end = match (kind, open) {
                        ("class" | "interface", Some(open)) => open,
                        _ => end.min(toks.len()),
                    };
                    items.push(ApiItem {
                        file: file.clone(),
                        owner: None,
                        name: name.clone(),
                        signature: render(&toks[j..header_end]),
                    });
                    if let Some(open) = open {
                        members(&toks, open, file, &name, &mut items);
                    }
                    i = end;
                    continue;
                }
                _ => {}
            }
            i += 1;
        }
    }
    items
}

/// Index just past the declaration starting at `i`: its closing `}` at depth
/// zero, or the terminating `;`. Type arguments in the header are skipped.
fn statement_end(toks: &[Tok], i: usize) -> usize {
    let mut depth = 0i32;
    let mut angle = 0i32;
    let mut j = i;
    while j < toks.len() {
        match toks[j] {
            Tok::Punct('<') if depth == 0 => angle += 1,
            Tok::Punct('>') if depth == 0 && toks[j - 1] != Tok::Punct('=') => angle -= 1,
            Tok::Punct('{') | Tok::Punct('(') | Tok::Punct('[') => depth += 1,
            Tok::Punct('}') | Tok::Punct(')') | Tok::Punct(']') => {
                depth -= 1;
                if depth == 0 && angle == 0 && toks[j] == Tok::Punct('}') {
                    if toks.get(j + 1) == Some(&Tok::Punct(';')) {
                        return j + 2;
                    }
                    if !matches!(toks.get(j + 1), Some(Tok::Punct('&' | '[' | '|'))) {
                        return j + 1;
                    }
                }
            }
            Tok::Punct(';') if depth == 0 && angle == 0 => return j + 1,
            _ => {}
        }
        j += 1;
    }
    j
}

/// The `{` opening a class, interface or object-type body, outside any type
/// arguments of the header.
fn body_open(toks: &[Tok], from: usize, end: usize) -> Option<usize> {
    let mut angle = 0i32;
    for k in from..end {
        match toks[k] {
            Tok::Punct('<') => angle += 1,
            Tok::Punct('>') if toks[k - 1] != Tok::Punct('=') => angle -= 1,
            Tok::Punct('{') if angle == 0 => return Some(k),
            Tok::Punct('(') if angle == 0 => return None,
            _ => {}
        }
    }
    None
}

fn members(toks: &[Tok], open: usize, file: &str, owner: &str, items: &mut Vec<ApiItem>) {
    let mut i = open + 1;
    while i < toks.len() && toks[i] != Tok::Punct('}') {
        let start = i;
        let mut private = false;
        while let Some(m) = ident(toks.get(i)) {
            if m == "private" || m == "protected" {
                private = true;
            } else if !MODIFIERS.contains(&m) {
                break;
            }
            if matches!(
                toks.get(i + 1),
                Some(Tok::Punct('(' | ':' | '?' | '=' | '<' | ';'))
            ) {
                break;
            }
            i += 1;
        }
        let name = match toks.get(i) {
            Some(Tok::Ident(n)) => n.clone(),
            Some(Tok::Str(s)) => s.clone(),
            _ => {
                i += 1;
                continue;
            }
        };
        // Member runs to `;` or `,` at this level, or past a method body.
        let mut depth = 0i32;
        let mut j = i + 1;
        let mut sig_end = None;
        while j < toks.len() {
            match toks[j] {
                Tok::Punct('(') | Tok::Punct('[') | Tok::Punct('<') => depth += 1,
                Tok::Punct(')') | Tok::Punct(']') => depth -= 1,
                Tok::Punct('>') if j > 0 && toks[j - 1] != Tok::Punct('=') => depth -= 1,
                Tok::Punct('{') => {
                    let close = matching(toks, j);
                    let is_body = depth == 0
                        && matches!(toks[j - 1], Tok::Punct(')') | Tok::Ident(_))
                        && toks.get(close + 1) != Some(&Tok::Punct(';'));
                    if is_body {
                        sig_end = Some(j);
                        j = close;
                        break;
                    }
                    j = close;
                }
                Tok::Punct(';') | Tok::Punct(',') if depth <= 0 => break,
                Tok::Punct('}') => {
                    j -= 1;
                    break;
                }
                _ => {}
            }
            j += 1;
        }
        let end = (j + 1).min(toks.len());
        if !private && !name.starts_with('#') {
            items.push(ApiItem {
                file: file.to_owned(),
                owner: Some(owner.to_owned()),
                name,
                signature: render(&toks[start..sig_end.unwrap_or(end)]),
            });
        }
        i = end;
    }
}

fn matching(toks: &[Tok], open: usize) -> usize {
    let mut depth = 0;
    for (k, t) in toks.iter().enumerate().skip(open) {
        match t {
            Tok::Punct('{') => depth += 1,
            Tok::Punct('}') => {
                depth -= 1;
                if depth == 0 {
                    return k;
                }
            }
            _ => {}
        }
    }
    toks.len() - 1
}

fn is_raw_io_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    ["send", "receive", "recv"]
        .iter()
        .any(|p| lower.starts_with(p))
}

/// Public API items that let user code perform raw IO: a callable named like
/// a send/receive primitive, or one that accepts a connection object.
pub fn exposed_channels(bundle: &SourceBundle) -> Vec<ApiItem> {
    public_api(bundle)
        .into_iter()
        .filter(|item| {
            let callable = item.signature.contains('(');
            let takes_socket = item
                .signature
                .split(' ')
                .any(|t| t == "Socket" || t == "WebSocket");
            callable && (is_raw_io_name(&item.name) || takes_socket)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::RoleName;
    use crate::codegen::{Target, TransitionTable};

    fn bundle(files: &[(&str, &str)]) -> SourceBundle {
        SourceBundle {
            target: Target::Node,
            role: RoleName::new("R"),
            files: files
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            manifest: vec![],
            table: TransitionTable {
                rows: BTreeMap::new(),
            },
        }
    }

    #[test]
    fn strings_and_comments_are_not_references() {
        let b = bundle(&[(
            "a.ts",
            "// S9 here\nconst x = \"S7\"; /* S8 */ export type S0 = [];\n",
        )]);
        assert_eq!(check_closed(&b), Ok(()));
    }

    #[test]
    fn dangling_state_reference() {
        let b = bundle(&[("a.ts", "export type S0 = { X: (payload: number) => S4 };\n")]);
        assert_eq!(
            check_closed(&b),
            Err(vec![ClosednessError::UndefinedState {
                file: "a.ts".into(),
                name: "S4".into()
            }])
        );
    }

    #[test]
    fn imports_must_match_exports() {
        let ok = bundle(&[
            ("States.ts", "export type S0 = [];\n"),
            (
                "R.ts",
                "import type { S0 } from \"./States\";\nlet s: S0;\n",
            ),
        ]);
        assert_eq!(check_closed(&ok), Ok(()));
        let bad = bundle(&[
            ("States.ts", "export type S0 = [];\n"),
            (
                "R.ts",
                "import type { S1 } from \"./States\";\nlet s: S1;\n",
            ),
        ]);
        assert!(check_closed(&bad).is_err());
    }

    #[test]
    fn re_exports_are_followed() {
        let b = bundle(&[
            ("States.ts", "export type S0 = [];\n"),
            ("index.ts", "export * from \"./States\";\n"),
            ("R.ts", "import type { S0 } from \"./index\";\nlet s: S0;\n"),
        ]);
        assert_eq!(check_closed(&b), Ok(()));
    }

    #[test]
    fn private_members_are_not_api() {
        let b = bundle(&[(
            "R.ts",
            "class Hidden { send(x: Socket): void {} }\n\
             export class R {\n  private readonly s: Hidden;\n  constructor(server: SocketServer) {}\n  private send(): void {}\n  render(): null { return null; }\n}\n",
        )]);
        let names: Vec<String> = public_api(&b).into_iter().map(|i| i.name).collect();
        assert_eq!(names, ["R", "constructor", "render"]);
        assert_eq!(exposed_channels(&b), vec![]);
    }

    #[test]
    fn public_send_is_exposed() {
        let b = bundle(&[(
            "R.ts",
            "export interface Props {\n  Pos: Factory<Point>;\n  send(label: string): void;\n}\n\
             export function attach(ws: WebSocket): void {}\n",
        )]);
        let names: Vec<String> = exposed_channels(&b).into_iter().map(|i| i.name).collect();
        assert_eq!(names, ["send", "attach"]);
    }
}
