export { Labels } from "./Labels";
export * from "./States";
export { P2 } from "./P2";
export type { P2Props } from "./P2";
