/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_recomposition_free: (a: number, b: number) => void;
export const chain_ber: (a: number, b: number, c: bigint) => [number, number, number, number];
export const eta_curve: (a: number, b: number, c: number) => [number, number, number, number];
export const feasible_rank: (a: number, b: number, c: number) => number;
export const recompose_digit: (a: number, b: bigint, c: number) => [number, number, number];
export const recomposition_generated: (a: number) => [number, number];
export const recomposition_mse_closed_form: (a: number) => number;
export const recomposition_mse_generated: (a: number) => number;
export const recomposition_mse_recomposed: (a: number) => number;
export const recomposition_original: (a: number) => [number, number];
export const recomposition_recomposed: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
