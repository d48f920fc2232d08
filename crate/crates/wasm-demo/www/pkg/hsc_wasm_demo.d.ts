/* tslint:disable */
/* eslint-disable */

export class Recomposition {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    generated(): Float64Array;
    original(): Float64Array;
    recomposed(): Float64Array;
    readonly mse_closed_form: number;
    readonly mse_generated: number;
    readonly mse_recomposed: number;
}

/**
 * Coded and uncoded bit error rates of the convolutional code over 16-QAM
 * on AWGN, `[uncoded, coded]`.
 */
export function chain_ber(snr_db: number, n_bits: number, seed: bigint): Float64Array;

/**
 * Compression ratio for `d = 0..=side`.
 */
export function eta_curve(k: number, rate: number, side: number): Float64Array;

export function feasible_rank(k: number, rate: number, side: number): number;

/**
 * A digit, its degraded copy, and the rank-`d` recomposition with exact CR.
 */
export function recompose_digit(digit: number, seed: bigint, d: number): Recomposition;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_recomposition_free: (a: number, b: number) => void;
    readonly chain_ber: (a: number, b: number, c: bigint) => [number, number, number, number];
    readonly eta_curve: (a: number, b: number, c: number) => [number, number, number, number];
    readonly feasible_rank: (a: number, b: number, c: number) => number;
    readonly recompose_digit: (a: number, b: bigint, c: number) => [number, number, number];
    readonly recomposition_generated: (a: number) => [number, number];
    readonly recomposition_mse_closed_form: (a: number) => number;
    readonly recomposition_mse_generated: (a: number) => number;
    readonly recomposition_mse_recomposed: (a: number) => number;
    readonly recomposition_original: (a: number) => [number, number];
    readonly recomposition_recomposed: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
