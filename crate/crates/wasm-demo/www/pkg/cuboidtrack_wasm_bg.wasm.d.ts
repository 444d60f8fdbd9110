/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_heatmapdemo_free: (a: number, b: number) => void;
export const box_iou: (a: number, b: number, c: number, d: number) => number;
export const footprint: (a: number, b: number) => [number, number];
export const heatmapdemo_add_keypoint: (a: number, b: number, c: number, d: number) => number;
export const heatmapdemo_clear: (a: number) => void;
export const heatmapdemo_cols: (a: number) => number;
export const heatmapdemo_new: (a: number, b: number, c: number) => number;
export const heatmapdemo_peaks: (a: number, b: number, c: number) => [number, number];
export const heatmapdemo_rows: (a: number) => number;
export const heatmapdemo_values: (a: number) => [number, number];
export const loss_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
export const scale_for_sigma: (a: number) => number;
export const symmetric_box_iou: (a: number, b: number, c: number, d: number, e: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
