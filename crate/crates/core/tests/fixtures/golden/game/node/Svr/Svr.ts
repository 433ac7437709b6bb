import type { S0 } from "./States";

/** The subset of a `ws` WebSocket the runtime relies on. */
export interface Socket {
  send(data: string): void;
  close(): void;
  on(event: string, listener: (...args: any[]) => void): unknown;
}

/** The subset of a `ws` WebSocketServer the runtime relies on. */
export interface SocketServer {
  on(event: string, listener: (...args: any[]) => void): unknown;
}

type Role = "P1" | "P2";

const roles: readonly Role[] = ["P1", "P2"];

type StateInfo = { kind: "send" } | { kind: "receive"; from: Role } | { kind: "terminal" };

interface Transition {
  partner: Role;
  direction: "send" | "receive";
  target: string;
  arity: number;
}

interface Frame {
  label: string;
  payload: unknown[];
}

const initial = "S0";

const states: { readonly [state: string]: StateInfo } = {
  S0: { kind: "receive", from: "P1" },
  S1: { kind: "send" },
  S2: { kind: "send" },
  S3: { kind: "send" },
  S4: { kind: "send" },
  S5: { kind: "terminal" },
  S6: { kind: "receive", from: "P2" },
  S7: { kind: "send" },
  S8: { kind: "send" },
  S9: { kind: "send" },
  S10: { kind: "send" },
};

const transitions: { readonly [state: string]: { readonly [label: string]: Transition } } = {
  S0: {
    Pos: { partner: "P1", direction: "receive", target: "S1", arity: 1 },
  },
  S1: {
    Draw: { partner: "P2", direction: "send", target: "S2", arity: 1 },
    Lose: { partner: "P2", direction: "send", target: "S3", arity: 1 },
    Update: { partner: "P2", direction: "send", target: "S4", arity: 1 },
  },
  S2: {
    Draw: { partner: "P1", direction: "send", target: "S5", arity: 1 },
  },
  S3: {
    Win: { partner: "P1", direction: "send", target: "S5", arity: 1 },
  },
  S4: {
    Update: { partner: "P1", direction: "send", target: "S6", arity: 1 },
  },
  S6: {
    Pos: { partner: "P2", direction: "receive", target: "S7", arity: 1 },
  },
  S7: {
    Draw: { partner: "P1", direction: "send", target: "S8", arity: 1 },
    Lose: { partner: "P1", direction: "send", target: "S9", arity: 1 },
    Update: { partner: "P1", direction: "send", target: "S10", arity: 1 },
  },
  S8: {
    Draw: { partner: "P2", direction: "send", target: "S5", arity: 1 },
  },
  S9: {
    Win: { partner: "P2", direction: "send", target: "S5", arity: 1 },
  },
  S10: {
    Update: { partner: "P2", direction: "send", target: "S0", arity: 1 },
  },
};

function lookup(state: string, label: unknown): Transition {
  const row = transitions[state];
  if (typeof label !== "string" || row === undefined || !Object.prototype.hasOwnProperty.call(row, label)) {
    throw new Error(`label ${String(label)} is not allowed in state ${state}`);
  }
  return row[label];
}

function isRole(name: unknown): name is Role {
  return typeof name === "string" && (roles as readonly string[]).includes(name);
}

/** Owns the connections; never exposed outside this file. */
class Session {
  private readonly sockets = new Map<Role, Socket>();
  private readonly inbox = new Map<Role, Frame[]>();
  private waiting: { from: Role; resolve: (frame: Frame) => void; reject: (error: Error) => void } | undefined;
  private started = false;
  private closed = false;

  constructor(
    server: SocketServer,
    private readonly ready: () => void,
    private readonly fail: (error: Error) => void,
  ) {
    server.on("connection", (socket: Socket) => this.accept(socket));
  }

  private accept(socket: Socket): void {
    let role: Role | undefined;
    socket.on("message", (data: unknown) => {
      let frame: any;
      try {
        frame = JSON.parse(String(data));
      } catch {
        frame = undefined;
      }
      if (role === undefined) {
        const claimed = frame?.connect;
        if (this.started || !isRole(claimed) || this.sockets.has(claimed)) {
          socket.close();
          return;
        }
        role = claimed;
        this.sockets.set(role, socket);
        this.inbox.set(role, []);
        if (this.sockets.size === roles.length) {
          this.started = true;
          for (const s of this.sockets.values()) {
            s.send(JSON.stringify({ start: true }));
          }
          this.ready();
        }
        return;
      }
      if (typeof frame?.label !== "string" || !Array.isArray(frame?.payload)) {
        this.abort(new Error(`malformed frame from ${role}`));
        return;
      }
      this.deliver(role, { label: frame.label, payload: frame.payload });
    });
    socket.on("close", () => {
      if (role === undefined || this.sockets.get(role) !== socket) {
        return;
      }
      if (this.started) {
        this.abort(new Error(`${role} disconnected`));
      } else {
        this.sockets.delete(role);
      }
    });
  }

  private deliver(from: Role, frame: Frame): void {
    const waiting = this.waiting;
    if (waiting !== undefined && waiting.from === from) {
      this.waiting = undefined;
      waiting.resolve(frame);
    } else {
      this.inbox.get(from)?.push(frame);
    }
  }

  receive(from: Role): Promise<Frame> {
    const queued = this.inbox.get(from)?.shift();
    if (queued !== undefined) {
      return Promise.resolve(queued);
    }
    if (this.closed) {
      return Promise.reject(new Error("session closed"));
    }
    return new Promise((resolve, reject) => {
      this.waiting = { from, resolve, reject };
    });
  }

  send(to: Role, label: string, payload: unknown[]): void {
    this.sockets.get(to)?.send(JSON.stringify({ label, payload }));
  }

  close(): void {
    if (this.closed) {
      return;
    }
    this.closed = true;
    for (const s of this.sockets.values()) {
      s.close();
    }
  }

  private abort(error: Error): void {
    if (this.closed) {
      return;
    }
    const waiting = this.waiting;
    this.waiting = undefined;
    this.close();
    if (waiting !== undefined) {
      waiting.reject(error);
    } else {
      this.fail(error);
    }
  }
}

/**
 * Runs the `Svr` endpoint of `Game`. Execution starts once every other
 * role has connected; `initialState` supplies the behaviour for the first
 * state, and each callback or tuple supplies the next.
 */
export class Svr {
  private readonly session: Session;

  constructor(
    server: SocketServer,
    initialState: S0,
    onError: (error: Error) => void = (error) => {
      throw error;
    },
  ) {
    this.session = new Session(server, () => {
      this.execute(initialState).catch(onError);
    }, onError);
  }

  private async execute(value: unknown): Promise<void> {
    let state = initial;
    let current: any = value;
    for (;;) {
      const info = states[state];
      if (info.kind === "terminal") {
        this.session.close();
        return;
      }
      if (info.kind === "send") {
        const [label, payload, next] = current as [unknown, unknown, unknown];
        const t = lookup(state, label);
        this.session.send(t.partner, label as string, t.arity === 1 ? [payload] : (payload as unknown[]));
        state = t.target;
        current = next;
      } else {
        const frame = await this.session.receive(info.from);
        const t = lookup(state, frame.label);
        if (frame.payload.length !== t.arity) {
          throw new Error(`${frame.label} expects ${t.arity} payload values, got ${frame.payload.length}`);
        }
        current = current[frame.label](t.arity === 1 ? frame.payload[0] : frame.payload);
        state = t.target;
      }
    }
  }
}
