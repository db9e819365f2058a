/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_episode_free: (a: number, b: number) => void;
export const attribute_names: () => [number, number];
export const compare_policies: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const episode_done: (a: number) => number;
export const episode_frame: (a: number) => [number, number];
export const episode_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const episode_step: (a: number) => [number, number, number, number];
export const gaze_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
