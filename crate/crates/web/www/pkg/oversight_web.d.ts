/* tslint:disable */
/* eslint-disable */

/**
 * One episode stepped from JavaScript.
 */
export class Episode {
    free(): void;
    [Symbol.dispose](): void;
    done(): boolean;
    /**
     * The current frame as JSON.
     */
    frame(): string;
    constructor(policy: string, seed: number, highlight_boost: number);
    /**
     * Advance one step and return the new frame as JSON.
     */
    step(): string;
}

/**
 * Canonical attribute names, in display order, as a JSON array.
 */
export function attribute_names(): string;

/**
 * Mean episode reward of never, rule-based and always highlighting, as JSON.
 */
export function compare_policies(episodes: number, seed: number, highlight_penalty: number, highlight_boost: number): string;

/**
 * Gaze probability of all 32 icons given highlight bits (0/1 per icon).
 */
export function gaze_heatmap(highlights: Uint8Array, highlight_boost: number, temperature: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_episode_free: (a: number, b: number) => void;
    readonly attribute_names: () => [number, number];
    readonly compare_policies: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly episode_done: (a: number) => number;
    readonly episode_frame: (a: number) => [number, number];
    readonly episode_new: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly episode_step: (a: number) => [number, number, number, number];
    readonly gaze_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
