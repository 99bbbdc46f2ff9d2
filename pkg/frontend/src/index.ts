export * from "./types";
export * from "./geometry";
export * from "./sketch";
export * from "./breakdown";
export * from "./timeline";
export * from "./api";
export * from "./controls";
