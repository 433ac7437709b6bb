//! Browser target: one abstract React component per state.
//!
//! A send state receives one factory prop per label. Calling a factory binds
//! the send to a UI event on a single wrapped element; the first trigger
//! sends and renders the successor, which disarms every trigger created for
//! that state. A receive state declares one abstract handler per branch.
//! The runtime component owns the connection and renders the active state.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use crate::ast::{Module, RoleName};
use crate::efsm::{Efsm, StateId, StateKind};

use super::*;

/// Encoding of one state as an abstract component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateComponentSpec {
    pub state: StateId,
    pub kind: &'static str,
    /// Factory props, one per outgoing label of a send state.
    pub props: Vec<(String, String)>,
    /// Abstract handlers, one per branch of a receive state.
    pub abstract_members: Vec<(String, String)>,
}

impl StateComponentSpec {
    pub fn from_state(efsm: &Efsm, state: StateId, module: &Module) -> Result<Self, CodegenError> {
        let kind = efsm.kind(state);
        let mut props = Vec::new();
        let mut abstract_members = Vec::new();
        for t in efsm.outgoing(state) {
            let payload = payload_type(&t.payloads, module)?;
            match kind {
                StateKind::Send => props.push((t.label.clone(), format!("Factory<{payload}>"))),
                StateKind::Receive { .. } => {
                    abstract_members.push((t.label.clone(), format!("(payload: {payload}): void")))
                }
                StateKind::Terminal => {}
            }
        }
        Ok(StateComponentSpec {
            state,
            kind: kind.name(),
            props,
            abstract_members,
        })
    }

    fn props_name(&self) -> Option<String> {
        (self.kind == "send").then(|| format!("{}Props", self.state))
    }
}

/// Props of the runtime component: the endpoint plus one concrete
/// component per state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeComponentSpec {
    pub role: RoleName,
    pub endpoint_prop: &'static str,
    /// State → constructor type of its concrete component.
    pub states: BTreeMap<StateId, String>,
}

impl RuntimeComponentSpec {
    pub fn from_components(role: &RoleName, components: &[StateComponentSpec]) -> Self {
        let states = components
            .iter()
            .map(|c| {
                let props = c.props_name().unwrap_or_else(|| "{}".to_owned());
                (c.state, format!("new (props: {props}) => {}", c.state))
            })
            .collect();
        RuntimeComponentSpec {
            role: role.clone(),
            endpoint_prop: "endpoint",
            states,
        }
    }

    /// The state map must cover every machine state exactly once.
    pub fn validate(&self, efsm: &Efsm) -> Result<(), CodegenError> {
        let expected: BTreeSet<&StateId> = efsm.states.keys().collect();
        let actual: BTreeSet<&StateId> = self.states.keys().collect();
        let missing: Vec<String> = expected
            .difference(&actual)
            .map(|s| s.to_string())
            .collect();
        let extra: Vec<String> = actual
            .difference(&expected)
            .map(|s| s.to_string())
            .collect();
        if missing.is_empty() && extra.is_empty() {
            Ok(())
        } else {
            Err(CodegenError::StateMapMismatch(format!(
                "missing [{}], extra [{}]",
                missing.join(", "),
                extra.join(", ")
            )))
        }
    }
}

pub fn emit_browser_api(
    efsm: &Efsm,
    module: &Module,
    protocol: &str,
    server: &RoleName,
) -> Result<SourceBundle, CodegenError> {
    check_role(module, protocol, &efsm.role)?;
    if &efsm.role == server {
        return Err(CodegenError::ServerRoleRequested(server.clone()));
    }
    check_topology(module, protocol, server)?;
    validate_names(efsm, module, protocol, Target::Browser)?;
    let components = efsm
        .states
        .keys()
        .map(|s| StateComponentSpec::from_state(efsm, *s, module))
        .collect::<Result<Vec<_>, _>>()?;
    let runtime = RuntimeComponentSpec::from_components(&efsm.role, &components);
    runtime.validate(efsm)?;
    let table = TransitionTable::from_efsm(efsm);
    let role = efsm.role.as_str();
    let mut files = BTreeMap::new();
    files.insert("Labels.ts".to_owned(), labels_file(efsm));
    files.insert("States.tsx".to_owned(), states_file(&components, module));
    files.insert(
        format!("{role}.tsx"),
        runtime_file(efsm, server, &components, &runtime, &table),
    );
    files.insert(
        "index.ts".to_owned(),
        format!(
            "export {{ Labels }} from \"./Labels\";\n\
             export * from \"./States\";\n\
             export {{ {role} }} from \"./{role}\";\n\
             export type {{ {role}Props }} from \"./{role}\";\n"
        ),
    );
    Ok(SourceBundle {
        target: Target::Browser,
        role: efsm.role.clone(),
        files,
        manifest: manifest(efsm),
        table,
    })
}

/// DOM events a send can be bound to, and the React prop that carries each.
const EVENTS: &[(&str, &str)] = &[
    ("blur", "onBlur"),
    ("change", "onChange"),
    ("click", "onClick"),
    ("contextmenu", "onContextMenu"),
    ("dblclick", "onDoubleClick"),
    ("focus", "onFocus"),
    ("input", "onInput"),
    ("keydown", "onKeyDown"),
    ("keyup", "onKeyUp"),
    ("mousedown", "onMouseDown"),
    ("mouseenter", "onMouseEnter"),
    ("mouseleave", "onMouseLeave"),
    ("mouseup", "onMouseUp"),
    ("submit", "onSubmit"),
    ("touchend", "onTouchEnd"),
    ("touchstart", "onTouchStart"),
];

fn states_file(components: &[StateComponentSpec], module: &Module) -> String {
    let events: Vec<String> = EVENTS.iter().map(|(e, _)| js_string(e)).collect();
    let mut out = String::from("import * as React from \"react\";\n");
    out.push_str(&import_lines(module));
    write!(
        out,
        "\nexport type EventName = {};\n\n\
         /** Wraps a single element; its bound event performs the send at most once. */\n\
         export type SendTrigger = React.ComponentType<{{ children: React.ReactElement }}>;\n\n\
         export type Factory<T> = (event: EventName, handler: (event: UIEvent) => T) => SendTrigger;\n",
        events.join(" | ")
    )
    .unwrap();
    for c in components {
        out.push('\n');
        match c.props_name() {
            Some(props) => {
                writeln!(out, "export interface {props} {{").unwrap();
                for (name, sig) in &c.props {
                    writeln!(out, "  readonly {name}: {sig};").unwrap();
                }
                out.push_str("}\n\n");
                writeln!(
                    out,
                    "export abstract class {} extends React.Component<{props}> {{}}",
                    c.state
                )
                .unwrap();
            }
            None if c.abstract_members.is_empty() => {
                writeln!(
                    out,
                    "export abstract class {} extends React.Component {{}}",
                    c.state
                )
                .unwrap();
            }
            None => {
                writeln!(
                    out,
                    "export abstract class {} extends React.Component {{",
                    c.state
                )
                .unwrap();
                for (name, sig) in &c.abstract_members {
                    writeln!(out, "  abstract {name}{sig};").unwrap();
                }
                out.push_str("}\n");
            }
        }
    }
    out
}

fn runtime_file(
    efsm: &Efsm,
    server: &RoleName,
    components: &[StateComponentSpec],
    runtime: &RuntimeComponentSpec,
    table: &TransitionTable,
) -> String {
    let role = efsm.role.as_str();
    let mut imported: Vec<String> = vec!["EventName".into(), "SendTrigger".into()];
    for c in components {
        imported.push(c.state.to_string());
        imported.extend(c.props_name());
    }
    let mut state_props = String::new();
    for (state, ctor) in &runtime.states {
        writeln!(state_props, "    {state}: {ctor};").unwrap();
    }
    let event_props: String = EVENTS
        .iter()
        .map(|(e, p)| format!("  {e}: \"{p}\",\n"))
        .collect();
    format!(
        r#"import * as React from "react";
import type {{ {imported} }} from "./States";

type Role = {server};

const role = "{role}";

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

/** One per state entry; every trigger created in that state shares it. */
interface Token {{
  fired: boolean;
}}

const initial = "{initial}";

const states: {{ readonly [state: string]: StateInfo }} = {{
{states}}};

const transitions: {{ readonly [state: string]: {{ readonly [label: string]: Transition }} }} = {{
{rows}}};

const eventProps: {{ readonly [event in EventName]: string }} = {{
{event_props}}};

function lookup(state: string, label: unknown): Transition {{
  const row = transitions[state];
  if (typeof label !== "string" || row === undefined || !Object.prototype.hasOwnProperty.call(row, label)) {{
    throw new Error(`label ${{String(label)}} is not allowed in state ${{state}}`);
  }}
  return row[label];
}}

export interface {role}Props {{
  /** WebSocket URL of the `{server_name}` endpoint. */
  {endpoint}: string;
  /** Concrete component for every state. */
  states: {{
{state_props}  }};
  /** Rendered until the session starts. */
  waiting?: React.ReactNode;
  onError?: (error: Error) => void;
}}

/** Runs the `{role}` endpoint and renders the component of the active state. */
export class {role} extends React.Component<{role}Props, {{ current: string | undefined }}> {{
  state: {{ current: string | undefined }} = {{ current: undefined }};
  private socket: WebSocket | undefined;
  private readonly inbox: Frame[] = [];
  private readonly active = React.createRef<any>();
  private token: Token = {{ fired: true }};
  private triggers: {{ [label: string]: unknown }} = {{}};
  private finished = false;

  componentDidMount(): void {{
    const socket = new WebSocket(this.props.{endpoint});
    this.socket = socket;
    socket.onopen = () => socket.send(JSON.stringify({{ connect: role }}));
    socket.onmessage = (event: MessageEvent) => this.onFrame(String(event.data));
    socket.onclose = () => {{
      if (!this.finished) {{
        this.fail(new Error("connection closed"));
      }}
    }};
  }}

  componentWillUnmount(): void {{
    this.finished = true;
    this.socket?.close();
  }}

  componentDidUpdate(): void {{
    this.drain();
  }}

  render(): React.ReactNode {{
    const current = this.state.current;
    if (current === undefined) {{
      return this.props.waiting ?? null;
    }}
    const component = (this.props.states as {{ [state: string]: unknown }})[current];
    return React.createElement(component as React.ComponentClass<any>, {{
      key: current,
      ref: this.active,
      ...this.triggers,
    }});
  }}

  private onFrame(text: string): void {{
    let frame: any;
    try {{
      frame = JSON.parse(text);
    }} catch {{
      frame = undefined;
    }}
    if (this.state.current === undefined) {{
      if (frame?.start === true) {{
        this.enter(initial);
      }} else {{
        this.fail(new Error("expected the start frame"));
      }}
      return;
    }}
    if (typeof frame?.label !== "string" || !Array.isArray(frame?.payload)) {{
      this.fail(new Error("malformed frame"));
      return;
    }}
    this.inbox.push({{ label: frame.label, payload: frame.payload }});
    this.drain();
  }}

  private enter(next: string): void {{
    this.token = {{ fired: false }};
    this.triggers = this.factories(next, this.token);
    if (states[next].kind === "terminal") {{
      this.finished = true;
      this.socket?.close();
    }}
    this.setState({{ current: next }});
  }}

  /** Handles one queued frame once the receiving component is mounted. */
  private drain(): void {{
    const current = this.state.current;
    const handlers = this.active.current;
    if (current === undefined || states[current].kind !== "receive" || handlers === null || this.inbox.length === 0) {{
      return;
    }}
    const frame = this.inbox.shift() as Frame;
    let t: Transition;
    try {{
      t = lookup(current, frame.label);
      if (frame.payload.length !== t.arity) {{
        throw new Error(`${{frame.label}} expects ${{t.arity}} payload values, got ${{frame.payload.length}}`);
      }}
    }} catch (error) {{
      this.fail(error as Error);
      return;
    }}
    handlers[frame.label](t.arity === 1 ? frame.payload[0] : frame.payload);
    this.enter(t.target);
  }}

  private factories(state: string, token: Token): {{ [label: string]: unknown }} {{
    const out: {{ [label: string]: unknown }} = {{}};
    if (states[state].kind === "send") {{
      for (const label of Object.keys(transitions[state])) {{
        out[label] = this.bindSend(token, state, label);
      }}
    }}
    return out;
  }}

  private bindSend(token: Token, state: string, label: string) {{
    return (event: EventName, handler: (event: UIEvent) => unknown): SendTrigger => {{
      const prop = eventProps[event];
      const Trigger = (props: {{ children: React.ReactElement }}) => {{
        const child = React.Children.only(props.children);
        const own = (child.props as any)[prop];
        return React.cloneElement(child, {{
          [prop]: (e: React.SyntheticEvent) => {{
            if (typeof own === "function") {{
              own(e);
            }}
            this.fire(token, state, label, () => handler(e.nativeEvent as UIEvent));
          }},
        }} as any);
      }};
      return Trigger;
    }};
  }}

  private fire(token: Token, state: string, label: string, payload: () => unknown): void {{
    if (token.fired || token !== this.token) {{
      return;
    }}
    token.fired = true;
    const t = lookup(state, label);
    const value = payload();
    this.socket?.send(JSON.stringify({{ label, payload: t.arity === 1 ? [value] : value }}));
    this.enter(t.target);
  }}

  private fail(error: Error): void {{
    this.finished = true;
    this.socket?.close();
    if (this.props.onError !== undefined) {{
      this.props.onError(error);
    }} else {{
      throw error;
    }}
  }}
}}
"#,
        imported = imported.join(", "),
        server = js_string(server.as_str()),
        server_name = server,
        endpoint = runtime.endpoint_prop,
        initial = efsm.initial,
        states = state_info(efsm),
        rows = transition_rows(table),
    )
}

/// The guard every trigger passes through before sending.
const DISARM_GUARD: &str = "  private fire(token: Token, state: string, label: string, payload: () => unknown): void {\n    \
                            if (token.fired || token !== this.token) {\n      return;\n    }\n    token.fired = true;\n";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffinityReport {
    /// Public API items that perform raw IO.
    pub raw_sends: Vec<ApiItem>,
    /// Runtime files whose triggers do not disarm after the first send.
    pub unguarded: Vec<String>,
    /// Properties the generated code cannot guarantee.
    pub limitations: Vec<&'static str>,
}

impl AffinityReport {
    pub fn passed(&self) -> bool {
        self.raw_sends.is_empty() && self.unguarded.is_empty()
    }
}

impl fmt::Display for AffinityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "raw send functions exposed: {}", self.raw_sends.len())?;
        for item in &self.raw_sends {
            writeln!(f, "  {item}")?;
        }
        writeln!(f, "triggers without disarm guard: {}", self.unguarded.len())?;
        for file in &self.unguarded {
            writeln!(f, "  {file}")?;
        }
        for l in &self.limitations {
            writeln!(f, "limitation: {l}")?;
        }
        writeln!(f, "result: {}", if self.passed() { "pass" } else { "fail" })
    }
}

/// Sends are reachable only through factories, and every factory's trigger
/// disarms after its first use. Channels are therefore used at most once;
/// whether every transition is bound to some event is not checked.
pub fn affinity_audit(bundle: &SourceBundle) -> AffinityReport {
    let mut unguarded = Vec::new();
    if bundle.target == Target::Browser {
        let runtime = format!("{}.tsx", bundle.role);
        let guarded = bundle.files.get(&runtime).is_some_and(|src| {
            // The guarded `fire` must be the only place frames are sent,
            // apart from the connection handshake.
            let sends = src.matches(".send(").count();
            src.contains(DISARM_GUARD)
                && sends == 2
                && src.contains("socket.send(JSON.stringify({ connect: role }))")
        });
        if !guarded {
            unguarded.push(runtime);
        }
    }
    // The transport interfaces are implemented by the caller, not handed to it.
    let raw_sends = exposed_channels(bundle)
        .into_iter()
        .filter(|item| !matches!(item.owner.as_deref(), Some("Socket" | "SocketServer")))
        .collect();
    AffinityReport {
        raw_sends,
        unguarded,
        limitations: vec![
            "states whose transitions are never bound to a UI event are not detected; \
             a session can stall in such a state",
            "a client that closes the page drops the connection",
        ],
    }
}
