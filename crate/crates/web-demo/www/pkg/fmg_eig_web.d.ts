/* tslint:disable */
/* eslint-disable */

/**
 * A P1 field on a triangulation, flattened for canvas drawing.
 */
export class Field {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly eigenvalue: number;
    /**
     * Vertex indices, three per triangle.
     */
    readonly triangles: Uint32Array;
    /**
     * One value per vertex, zero on the boundary.
     */
    readonly values: Float64Array;
    /**
     * `x0, y0, x1, y1, ...`
     */
    readonly vertices: Float64Array;
}

/**
 * Eigenfunction `index` (0-based) computed by full multigrid on a
 * `levels`-level hierarchy over the `nx × nx` unit square.
 */
export function eigenmode(problem_name: string, nx: number, levels: number, index: number): Field;

/**
 * Finest mesh of a hierarchy; `values` hold each vertex's level of birth.
 */
export function mesh_level(nx: number, level: number): Field;

/**
 * Convergence study table in the CLI's CSV format (wall time column zero).
 */
export function study(problem_name: string, nx: number, levels: number, q: number, compare_direct: boolean): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_field_free: (a: number, b: number) => void;
    readonly eigenmode: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly field_eigenvalue: (a: number) => number;
    readonly field_triangles: (a: number) => [number, number];
    readonly field_values: (a: number) => [number, number];
    readonly field_vertices: (a: number) => [number, number];
    readonly mesh_level: (a: number, b: number) => [number, number, number];
    readonly study: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
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
