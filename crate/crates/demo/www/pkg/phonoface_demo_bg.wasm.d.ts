/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_heatmap_free: (a: number, b: number) => void;
export const __wbg_scatter_free: (a: number, b: number) => void;
export const heatmap_data: (a: number) => [number, number];
export const heatmap_n_frames: (a: number) => number;
export const heatmap_n_mels: (a: number) => number;
export const plantedScatter: (a: number, b: number, c: number, d: number) => [number, number, number];
export const ratioBound: (a: number, b: number, c: number) => [number, number, number, number];
export const scatter_am: (a: number) => [number, number];
export const scatter_r2: (a: number) => number;
export const scatter_recovered: (a: number) => [number, number];
export const toneHeatmap: (a: number, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
