//! Canonical source rendering. Parsing the output yields a tree that is
//! structurally equal to the input.

use std::fmt::Write;

use crate::ast::*;
use crate::lexer::quote;

const INDENT: &str = "  ";

pub fn pretty_print(module: &Module) -> String {
    let mut out = String::new();
    writeln!(out, "module {};", module.name).unwrap();
    if !module.type_imports.is_empty() {
        out.push('\n');
    }
    for imp in &module.type_imports {
        writeln!(
            out,
            "type <{}> {} from {} as {};",
            imp.target_tag,
            quote(&imp.external_name),
            quote(&imp.source_path),
            imp.alias
        )
        .unwrap();
    }
    for p in &module.protocols {
        out.push('\n');
        let roles: Vec<String> = p.roles.iter().map(|r| format!("role {r}")).collect();
        writeln!(out, "global protocol {}({}) {{", p.name, roles.join(", ")).unwrap();
        body(&mut out, &p.body, 1);
        out.push_str("}\n");
    }
    out
}

fn body(out: &mut String, stmts: &GBody, depth: usize) {
    for stmt in stmts {
        indent(out, depth);
        match stmt {
            GStatement::Message(m) => {
                let payloads: Vec<&str> = m.payloads.iter().map(|p| p.name.as_str()).collect();
                writeln!(
                    out,
                    "{}({}) from {} to {};",
                    m.label,
                    payloads.join(", "),
                    m.from,
                    m.to
                )
                .unwrap();
            }
            GStatement::Choice(c) => {
                writeln!(out, "choice at {} {{", c.at).unwrap();
                for (i, branch) in c.branches.iter().enumerate() {
                    if i > 0 {
                        indent(out, depth);
                        out.push_str("} or {\n");
                    }
                    body(out, branch, depth + 1);
                }
                indent(out, depth);
                out.push_str("}\n");
            }
            GStatement::Do(d) => {
                let args: Vec<&str> = d.role_args.iter().map(|r| r.as_str()).collect();
                writeln!(out, "do {}({});", d.target, args.join(", ")).unwrap();
            }
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_module;

    #[test]
    fn empty_module_prints_header_only() {
        let m = parse_module("module X;").unwrap();
        assert_eq!(pretty_print(&m), "module X;\n");
    }

    #[test]
    fn game_round_trips() {
        let m = parse_module(include_str!("../tests/fixtures/game.scr")).unwrap();
        let text = pretty_print(&m);
        let again = parse_module(&text).unwrap();
        assert!(m.structurally_eq(&again));
        assert_eq!(pretty_print(&again), text);
    }

    #[test]
    fn nested_choice_layout() {
        let src = "module M; global protocol P(role A, role B) { choice at A { X() from A to B; \
                   choice at A { Y() from A to B; } or { Z() from A to B; } } or { W() from A to B; } }";
        let m = parse_module(src).unwrap();
        let text = pretty_print(&m);
        let expected = "\
module M;

global protocol P(role A, role B) {
  choice at A {
    X() from A to B;
    choice at A {
      Y() from A to B;
    } or {
      Z() from A to B;
    }
  } or {
    W() from A to B;
  }
}
";
        assert_eq!(text, expected);
        assert!(parse_module(&text).unwrap().structurally_eq(&m));
    }
}
