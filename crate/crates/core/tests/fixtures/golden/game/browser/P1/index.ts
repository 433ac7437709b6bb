export { Labels } from "./Labels";
export * from "./States";
export { P1 } from "./P1";
export type { P1Props } from "./P1";
