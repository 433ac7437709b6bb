export { Labels } from "./Labels";
export * from "./States";
export { Svr } from "./Svr";
export type { Socket, SocketServer } from "./Svr";
export * as Game from "./Svr";
