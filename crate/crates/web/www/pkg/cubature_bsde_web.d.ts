/* tslint:disable */
/* eslint-disable */

/**
 * Solves a registered problem and returns the report with the exact value.
 */
export function solve(problem: string, dim: number, n: number, gamma: number, extrapolate: boolean): string;

/**
 * Interpolates a test function on the unit square at the given order.
 * Returns `{nodes: [[x, y], ...], max_error, values: [...]}` where `values`
 * samples the interpolant on a `resolution`² raster, row by row.
 */
export function sparse_explore(order: number, _function: string, resolution: number): string;

/**
 * Time points of the grid `T(1 - (1 - i/n)^gamma)`.
 */
export function time_grid(n: number, horizon: number, gamma: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly solve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sparse_explore: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly time_grid: (a: number, b: number, c: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
