/* tslint:disable */
/* eslint-disable */

export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Advance `n` IMEX steps.
     */
    advance(n: number): void;
    /**
     * Physical corners of every bulk cell, 8 numbers per cell in the
     * cell order of the state.
     */
    cell_quads(): Float64Array;
    /**
     * RGB colours of the relative deviation from equilibrium of field
     * `u`, `w` or `z`, three bytes per cell.
     */
    colors(field: string): Uint8Array;
    entropy(): number;
    /**
     * Largest relative change of the two conserved masses since the start.
     */
    mass_drift(): number;
    min_value(): number;
    /**
     * Perturbed equilibrium of unit masses on annulus(1, 2).
     */
    constructor(kind: string, n_r: number, n_theta: number, amplitude: number, mode: number, dt: number);
    /**
     * Physical end points of the surface cells, 4 numbers per cell.
     */
    surface_segments(): Float64Array;
    time(): number;
}

/**
 * Smallest nonzero eigenvalue of the discrete Laplacian on a circle.
 */
export function circle_poincare(radius: number, n_theta: number): number;

/**
 * `[u, w, z, residual_1, residual_2, residual_3]` for the given masses.
 */
export function equilibrium(m1: number, m2: number, area: number, length: number, mode: string, delta_k: number, delta_k_prime: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly circle_poincare: (a: number, b: number) => [number, number, number];
    readonly equilibrium: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly simulation_advance: (a: number, b: number) => [number, number];
    readonly simulation_cell_quads: (a: number) => [number, number];
    readonly simulation_colors: (a: number, b: number, c: number) => [number, number, number, number];
    readonly simulation_entropy: (a: number) => number;
    readonly simulation_mass_drift: (a: number) => number;
    readonly simulation_min_value: (a: number) => number;
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly simulation_surface_segments: (a: number) => [number, number];
    readonly simulation_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
