/* tslint:disable */
/* eslint-disable */

/**
 * A heatmap over an image, fed with keypoints of a chosen uncertainty.
 */
export class HeatmapDemo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Renders a keypoint at pixel `(x, y)` whose predicted std is `sigma`
     * pixels; the height is `render_scale(sigma)`. Returns that height.
     */
    add_keypoint(x: number, y: number, sigma: number): number;
    clear(): void;
    cols(): number;
    constructor(image_width: number, image_height: number, stride: number);
    /**
     * Peaks above `threshold`, flattened as `[x, y, confidence, sigma_x, sigma_y, ...]`.
     */
    peaks(threshold: number, max_peaks: number): Float64Array;
    rows(): number;
    /**
     * Row-major cell values in `[0, 1]`.
     */
    values(): Float64Array;
}

/**
 * IoU of two boxes given as `[x, y, z, yaw_deg, width, height, length]`
 * with yaw about the vertical axis. NaN for malformed input.
 */
export function box_iou(a: Float64Array, b: Float64Array): number;

/**
 * Top-down footprint corners `[x0, z0, x1, z1, x2, z2, x3, z3]` of a box
 * given like [`box_iou`].
 */
export function footprint(params: Float64Array): Float64Array;

/**
 * Losses at a fixed residual as the predicted uncertainty `u` sweeps
 * `[u_min, u_max]` on `samples` points. Rows are `[u, nll, kld, kld_plus]`
 * where `u` is `b̂` for the Laplace losses and `λσ̂²` for the squared one.
 * Non-finite entries (invalid inputs) come back as NaN.
 */
export function loss_curves(residual: number, beta: number, beta2: number, u_min: number, u_max: number, samples: number): Float64Array;

/**
 * Peak height assigned to a keypoint with the given pixel std.
 */
export function scale_for_sigma(sigma: number): number;

/**
 * Best IoU over `samples` rotations of `a` about its vertical axis, as
 * scored for rotationally symmetric objects.
 */
export function symmetric_box_iou(a: Float64Array, b: Float64Array, samples: number): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_heatmapdemo_free: (a: number, b: number) => void;
    readonly box_iou: (a: number, b: number, c: number, d: number) => number;
    readonly footprint: (a: number, b: number) => [number, number];
    readonly heatmapdemo_add_keypoint: (a: number, b: number, c: number, d: number) => number;
    readonly heatmapdemo_clear: (a: number) => void;
    readonly heatmapdemo_cols: (a: number) => number;
    readonly heatmapdemo_new: (a: number, b: number, c: number) => number;
    readonly heatmapdemo_peaks: (a: number, b: number, c: number) => [number, number];
    readonly heatmapdemo_rows: (a: number) => number;
    readonly heatmapdemo_values: (a: number) => [number, number];
    readonly loss_curves: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly scale_for_sigma: (a: number) => number;
    readonly symmetric_box_iou: (a: number, b: number, c: number, d: number, e: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
