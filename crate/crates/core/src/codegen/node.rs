//! Server-side target.
//!
//! A receive state becomes an object type with one callback per branch; a
//! send state becomes a union of `[label, payload, successor]` tuples, with
//! the successor dropped when it is the terminal state. The runtime class
//! drives the machine from a `ws`-compatible server handle and never hands a
//! connection to user code.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::ast::{Module, RoleName};
use crate::efsm::{Efsm, StateKind, Transition};

use super::*;

pub fn emit_node_api(
    efsm: &Efsm,
    module: &Module,
    protocol: &str,
) -> Result<SourceBundle, CodegenError> {
    check_role(module, protocol, &efsm.role)?;
    check_topology(module, protocol, &efsm.role).map_err(|e| match e {
        CodegenError::UnsupportedTopology { .. } => not_server_or(module, protocol, &efsm.role, e),
        other => other,
    })?;
    validate_names(efsm, module, protocol, Target::Node)?;
    if module
        .protocol(protocol)
        .is_some_and(|p| p.roles.iter().any(|r| r.name == protocol))
    {
        return Err(CodegenError::InvalidIdentifier {
            name: protocol.to_owned(),
            what: "namespace name (it names a role)",
        });
    }
    let table = TransitionTable::from_efsm(efsm);
    let role = efsm.role.as_str();
    let mut files = BTreeMap::new();
    files.insert("Labels.ts".to_owned(), labels_file(efsm));
    files.insert("States.ts".to_owned(), states_file(efsm, module)?);
    files.insert(
        format!("{role}.ts"),
        runtime_file(efsm, module, protocol, &table),
    );
    files.insert("index.ts".to_owned(), index_file(role, protocol));
    Ok(SourceBundle {
        target: Target::Node,
        role: efsm.role.clone(),
        files,
        manifest: manifest(efsm),
        table,
    })
}

/// A role that is not the hub of a server-centric protocol gets a clearer
/// error than the first offending message.
fn not_server_or(
    module: &Module,
    protocol: &str,
    role: &RoleName,
    err: CodegenError,
) -> CodegenError {
    let someone_else_is_hub = module.protocol(protocol).is_some_and(|p| {
        p.roles.iter().any(|r| {
            r.name != role.as_str() && check_topology(module, protocol, &RoleName::from(r)).is_ok()
        })
    });
    if someone_else_is_hub {
        CodegenError::NotServerRole(role.clone())
    } else {
        err
    }
}

fn states_file(efsm: &Efsm, module: &Module) -> Result<String, CodegenError> {
    let mut out = String::new();
    if !efsm.labels().is_empty() {
        out.push_str("import { Labels } from \"./Labels\";\n");
    }
    out.push_str(&import_lines(module));
    let terminal = efsm.terminal();
    for (id, kind) in &efsm.states {
        let arms = efsm.outgoing(*id);
        match kind {
            StateKind::Receive { .. } => {
                let members = arms
                    .iter()
                    .map(|t| {
                        let next = if Some(t.target) == terminal {
                            "void".to_owned()
                        } else {
                            t.target.to_string()
                        };
                        Ok(format!(
                            "{}: (payload: {}) => {next}",
                            t.label,
                            payload_type(&t.payloads, module)?
                        ))
                    })
                    .collect::<Result<Vec<_>, CodegenError>>()?;
                out.push('\n');
                if let [one] = members.as_slice() {
                    writeln!(out, "export type {id} = {{ {one} }};").unwrap();
                } else {
                    writeln!(out, "export type {id} = {{").unwrap();
                    for m in members {
                        writeln!(out, "  {m};").unwrap();
                    }
                    out.push_str("};\n");
                }
            }
            StateKind::Send => {
                let tuples = arms
                    .iter()
                    .map(|t| send_tuple(t, terminal == Some(t.target), module))
                    .collect::<Result<Vec<_>, _>>()?;
                out.push('\n');
                write!(out, "export type {id} = {}", tuples[0]).unwrap();
                for t in &tuples[1..] {
                    write!(out, "\n  | {t}").unwrap();
                }
                out.push_str(";\n");
            }
            StateKind::Terminal => {}
        }
    }
    Ok(out)
}

fn send_tuple(t: &Transition, to_terminal: bool, module: &Module) -> Result<String, CodegenError> {
    let payload = payload_type(&t.payloads, module)?;
    Ok(if to_terminal {
        format!("[Labels.{}, {payload}]", t.label)
    } else {
        format!("[Labels.{}, {payload}, {}]", t.label, t.target)
    })
}

fn runtime_file(efsm: &Efsm, module: &Module, protocol: &str, table: &TransitionTable) -> String {
    let role = efsm.role.as_str();
    let clients = other_roles(module, protocol, &efsm.role);
    let client_list: Vec<String> = clients.iter().map(|r| js_string(r.as_str())).collect();
    let initial_type = match efsm.kind(efsm.initial) {
        StateKind::Terminal => "void".to_owned(),
        _ => efsm.initial.to_string(),
    };
    let import = if initial_type == "void" {
        String::new()
    } else {
        format!("import type {{ {initial_type} }} from \"./States\";\n\n")
    };
    format!(
        r#"{import}/** The subset of a `ws` WebSocket the runtime relies on. */
export interface Socket {{
  send(data: string): void;
  close(): void;
  on(event: string, listener: (...args: any[]) => void): unknown;
}}

/** The subset of a `ws` WebSocketServer the runtime relies on. */
export interface SocketServer {{
  on(event: string, listener: (...args: any[]) => void): unknown;
}}

type Role = {role_union};

const roles: readonly Role[] = [{client_list}];

type StateInfo = {{ kind: "send" }} | {{ kind: "receive"; from: Role }} | {{ kind: "terminal" }};

interface Transition {{
  partner: Role;
  direction: "send" | "receive";
  target: string;
  arity: number;
}}

interface Frame {{
  label: string;
  payload: unknown[];
}}

const initial = "{initial}";

const states: {{ readonly [state: string]: StateInfo }} = {{
{states}}};

const transitions: {{ readonly [state: string]: {{ readonly [label: string]: Transition }} }} = {{
{rows}}};

function lookup(state: string, label: unknown): Transition {{
  const row = transitions[state];
  if (typeof label !== "string" || row === undefined || !Object.prototype.hasOwnProperty.call(row, label)) {{
    throw new Error(`label ${{String(label)}} is not allowed in state ${{state}}`);
  }}
  return row[label];
}}

function isRole(name: unknown): name is Role {{
  return typeof name === "string" && (roles as readonly string[]).includes(name);
}}

/** Owns the connections; never exposed outside this file. */
class Session {{
  private readonly sockets = new Map<Role, Socket>();
  private readonly inbox = new Map<Role, Frame[]>();
  private waiting: {{ from: Role; resolve: (frame: Frame) => void; reject: (error: Error) => void }} | undefined;
  private started = false;
  private closed = false;

  constructor(
    server: SocketServer,
    private readonly ready: () => void,
    private readonly fail: (error: Error) => void,
  ) {{
    server.on("connection", (socket: Socket) => this.accept(socket));
  }}

  private accept(socket: Socket): void {{
    let role: Role | undefined;
    socket.on("message", (data: unknown) => {{
      let frame: any;
      try {{
        frame = JSON.parse(String(data));
      }} catch {{
        frame = undefined;
      }}
      if (role === undefined) {{
        const claimed = frame?.connect;
        if (this.started || !isRole(claimed) || this.sockets.has(claimed)) {{
          socket.close();
          return;
        }}
        role = claimed;
        this.sockets.set(role, socket);
        this.inbox.set(role, []);
        if (this.sockets.size === roles.length) {{
          this.started = true;
          for (const s of this.sockets.values()) {{
            s.send(JSON.stringify({{ start: true }}));
          }}
          this.ready();
        }}
        return;
      }}
      if (typeof frame?.label !== "string" || !Array.isArray(frame?.payload)) {{
        this.abort(new Error(`malformed frame from ${{role}}`));
        return;
      }}
      this.deliver(role, {{ label: frame.label, payload: frame.payload }});
    }});
    socket.on("close", () => {{
      if (role === undefined || this.sockets.get(role) !== socket) {{
        return;
      }}
      if (this.started) {{
        this.abort(new Error(`${{role}} disconnected`));
      }} else {{
        this.sockets.delete(role);
      }}
    }});
  }}

  private deliver(from: Role, frame: Frame): void {{
    const waiting = this.waiting;
    if (waiting !== undefined && waiting.from === from) {{
      this.waiting = undefined;
      waiting.resolve(frame);
    }} else {{
      this.inbox.get(from)?.push(frame);
    }}
  }}

  receive(from: Role): Promise<Frame> {{
    const queued = this.inbox.get(from)?.shift();
    if (queued !== undefined) {{
      return Promise.resolve(queued);
    }}
    if (this.closed) {{
      return Promise.reject(new Error("session closed"));
    }}
    return new Promise((resolve, reject) => {{
      this.waiting = {{ from, resolve, reject }};
    }});
  }}

  send(to: Role, label: string, payload: unknown[]): void {{
    this.sockets.get(to)?.send(JSON.stringify({{ label, payload }}));
  }}

  close(): void {{
    if (this.closed) {{
      return;
    }}
    this.closed = true;
    for (const s of this.sockets.values()) {{
      s.close();
    }}
  }}

  private abort(error: Error): void {{
    if (this.closed) {{
      return;
    }}
    const waiting = this.waiting;
    this.waiting = undefined;
    this.close();
    if (waiting !== undefined) {{
      waiting.reject(error);
    }} else {{
      this.fail(error);
    }}
  }}
}}

/**
 * Runs the `{role}` endpoint of `{protocol}`. Execution starts once every other
 * role has connected; `initialState` supplies the behaviour for the first
 * state, and each callback or tuple supplies the next.
 */
export class {role} {{
  private readonly session: Session;

  constructor(
    server: SocketServer,
    initialState: {initial_type},
    onError: (error: Error) => void = (error) => {{
      throw error;
    }},
  ) {{
    this.session = new Session(server, () => {{
      this.execute(initialState).catch(onError);
    }}, onError);
  }}

  private async execute(value: unknown): Promise<void> {{
    let state = initial;
    let current: any = value;
    for (;;) {{
      const info = states[state];
      if (info.kind === "terminal") {{
        this.session.close();
        return;
      }}
      if (info.kind === "send") {{
        const [label, payload, next] = current as [unknown, unknown, unknown];
        const t = lookup(state, label);
        this.session.send(t.partner, label as string, t.arity === 1 ? [payload] : (payload as unknown[]));
        state = t.target;
        current = next;
      }} else {{
        const frame = await this.session.receive(info.from);
        const t = lookup(state, frame.label);
        if (frame.payload.length !== t.arity) {{
          throw new Error(`${{frame.label}} expects ${{t.arity}} payload values, got ${{frame.payload.length}}`);
        }}
        current = current[frame.label](t.arity === 1 ? frame.payload[0] : frame.payload);
        state = t.target;
      }}
    }}
  }}
}}
"#,
        role_union = role_union(&clients),
        client_list = client_list.join(", "),
        initial = efsm.initial,
        states = state_info(efsm),
        rows = transition_rows(table),
    )
}

fn index_file(role: &str, protocol: &str) -> String {
    format!(
        "export {{ Labels }} from \"./Labels\";\n\
         export * from \"./States\";\n\
         export {{ {role} }} from \"./{role}\";\n\
         export type {{ Socket, SocketServer }} from \"./{role}\";\n\
         export * as {protocol} from \"./{role}\";\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efsm::build_efsm;
    use crate::parser::parse_module;
    use crate::project::project;

    fn bundle(src: &str, protocol: &str, role: &str) -> Result<SourceBundle, CodegenError> {
        let m = parse_module(src).unwrap();
        let efsm = build_efsm(&project(&m, protocol, role).unwrap()).unwrap();
        emit_node_api(&efsm, &m, protocol)
    }

    fn svr() -> SourceBundle {
        bundle(include_str!("../../tests/fixtures/game.scr"), "Game", "Svr").unwrap()
    }

    #[test]
    fn file_layout() {
        let b = svr();
        let names: Vec<&str> = b.files.keys().map(String::as_str).collect();
        assert_eq!(names, ["Labels.ts", "States.ts", "Svr.ts", "index.ts"]);
    }

    #[test]
    fn initial_receive_state_encoding() {
        let states = &svr().files["States.ts"];
        assert!(
            states.contains("export type S0 = { Pos: (payload: Point) => S1 };\n"),
            "{states}"
        );
    }

    #[test]
    fn three_way_send_state_encoding() {
        let states = &svr().files["States.ts"];
        let expected = "export type S1 = [Labels.Draw, Point, S2]\n  | [Labels.Lose, Point, S3]\n  | [Labels.Update, Point, S4];\n";
        assert!(states.contains(expected), "{states}");
    }

    #[test]
    fn send_to_terminal_drops_successor() {
        let states = &svr().files["States.ts"];
        assert!(
            states.contains("export type S3 = [Labels.Win, Point];\n"),
            "{states}"
        );
        assert!(
            !states.contains("S5"),
            "terminal state is never named: {states}"
        );
    }

    #[test]
    fn imports_materialized() {
        let states = &svr().files["States.ts"];
        assert!(states.starts_with(
            "import { Labels } from \"./Labels\";\nimport type { Coordinate as Point } from \"./Types\";\n"
        ));
    }

    #[test]
    fn runtime_embeds_table_and_handshake() {
        let rt = &svr().files["Svr.ts"];
        assert!(rt.contains("export class Svr {"));
        assert!(rt.contains("constructor(\n    server: SocketServer,\n    initialState: S0,"));
        assert!(rt.contains(
            "    Pos: { partner: \"P1\", direction: \"receive\", target: \"S1\", arity: 1 },"
        ));
        assert!(rt.contains("const roles: readonly Role[] = [\"P1\", \"P2\"];"));
        assert!(rt.contains("JSON.stringify({ start: true })"));
        assert!(rt.contains("frame?.connect"));
    }

    #[test]
    fn namespace_export() {
        assert!(svr().files["index.ts"].contains("export * as Game from \"./Svr\";\n"));
    }

    #[test]
    fn client_role_rejected() {
        let err = bundle(include_str!("../../tests/fixtures/game.scr"), "Game", "P1").unwrap_err();
        assert_eq!(err, CodegenError::NotServerRole(RoleName::new("P1")));
    }

    #[test]
    fn peer_to_peer_rejected() {
        let err = bundle(
            "module M; global protocol P(role A, role B, role C) { X() from A to B; Y() from B to C; Z() from C to A; }",
            "P",
            "A",
        )
        .unwrap_err();
        assert!(
            matches!(err, CodegenError::UnsupportedTopology { .. }),
            "{err}"
        );
    }

    #[test]
    fn multi_payload_and_unit_encodings() {
        let b = bundle(
            "module M; global protocol P(role S, role C) { Bid(int, string) from C to S; \
             choice at S { Ok() from S to C; } or { No(bool) from S to C; } }",
            "P",
            "S",
        )
        .unwrap();
        let states = &b.files["States.ts"];
        assert!(
            states.contains("export type S0 = { Bid: (payload: [number, string]) => S1 };"),
            "{states}"
        );
        assert!(
            states.contains("export type S1 = [Labels.No, boolean]\n  | [Labels.Ok, []];"),
            "{states}"
        );
    }

    #[test]
    fn receive_into_terminal_returns_void() {
        let b = bundle(
            "module M; global protocol P(role S, role C) { Bye() from C to S; }",
            "P",
            "S",
        )
        .unwrap();
        assert!(b.files["States.ts"].contains("export type S0 = { Bye: (payload: []) => void };"));
    }

    #[test]
    fn deterministic() {
        assert_eq!(svr(), svr());
    }
}
