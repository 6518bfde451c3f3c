/* tslint:disable */
/* eslint-disable */

export class Heatmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Mel-major log energies.
     */
    data(): Float64Array;
    readonly n_frames: number;
    readonly n_mels: number;
}

export class Scatter {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    am(): Float64Array;
    recovered(): Float64Array;
    readonly r2: number;
}

export function plantedScatter(beta: number, noise_std: number, n_subjects: number, seed: number): Scatter;

export function ratioBound(ratios: Float64Array, alpha: number): Float64Array;

export function toneHeatmap(f0: number, f1: number, duration: number, noise: number): Heatmap;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_heatmap_free: (a: number, b: number) => void;
    readonly __wbg_scatter_free: (a: number, b: number) => void;
    readonly heatmap_data: (a: number) => [number, number];
    readonly heatmap_n_frames: (a: number) => number;
    readonly heatmap_n_mels: (a: number) => number;
    readonly plantedScatter: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly ratioBound: (a: number, b: number, c: number) => [number, number, number, number];
    readonly scatter_am: (a: number) => [number, number];
    readonly scatter_r2: (a: number) => number;
    readonly scatter_recovered: (a: number) => [number, number];
    readonly toneHeatmap: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
