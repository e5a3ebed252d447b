/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_field_free: (a: number, b: number) => void;
export const eigenmode: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const field_eigenvalue: (a: number) => number;
export const field_triangles: (a: number) => [number, number];
export const field_values: (a: number) => [number, number];
export const field_vertices: (a: number) => [number, number];
export const mesh_level: (a: number, b: number) => [number, number, number];
export const study: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
