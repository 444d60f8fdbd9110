/* @ts-self-types="./cuboidtrack_wasm.d.ts" */

/**
 * A heatmap over an image, fed with keypoints of a chosen uncertainty.
 */
export class HeatmapDemo {
    __destroy_into_raw() {
        const ptr = this.__wbg_ptr;
        this.__wbg_ptr = 0;
        HeatmapDemoFinalization.unregister(this);
        return ptr;
    }
    free() {
        const ptr = this.__destroy_into_raw();
        wasm.__wbg_heatmapdemo_free(ptr, 0);
    }
    /**
     * Renders a keypoint at pixel `(x, y)` whose predicted std is `sigma`
     * pixels; the height is `render_scale(sigma)`. Returns that height.
     * @param {number} x
     * @param {number} y
     * @param {number} sigma
     * @returns {number}
     */
    add_keypoint(x, y, sigma) {
        const ret = wasm.heatmapdemo_add_keypoint(this.__wbg_ptr, x, y, sigma);
        return ret;
    }
    clear() {
        wasm.heatmapdemo_clear(this.__wbg_ptr);
    }
    /**
     * @returns {number}
     */
    cols() {
        const ret = wasm.heatmapdemo_cols(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * @param {number} image_width
     * @param {number} image_height
     * @param {number} stride
     */
    constructor(image_width, image_height, stride) {
        const ret = wasm.heatmapdemo_new(image_width, image_height, stride);
        this.__wbg_ptr = ret;
        HeatmapDemoFinalization.register(this, this.__wbg_ptr, this);
        return this;
    }
    /**
     * Peaks above `threshold`, flattened as `[x, y, confidence, sigma_x, sigma_y, ...]`.
     * @param {number} threshold
     * @param {number} max_peaks
     * @returns {Float64Array}
     */
    peaks(threshold, max_peaks) {
        const ret = wasm.heatmapdemo_peaks(this.__wbg_ptr, threshold, max_peaks);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
    /**
     * @returns {number}
     */
    rows() {
        const ret = wasm.heatmapdemo_rows(this.__wbg_ptr);
        return ret >>> 0;
    }
    /**
     * Row-major cell values in `[0, 1]`.
     * @returns {Float64Array}
     */
    values() {
        const ret = wasm.heatmapdemo_values(this.__wbg_ptr);
        var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
        wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
        return v1;
    }
}
if (Symbol.dispose) HeatmapDemo.prototype[Symbol.dispose] = HeatmapDemo.prototype.free;

/**
 * IoU of two boxes given as `[x, y, z, yaw_deg, width, height, length]`
 * with yaw about the vertical axis. NaN for malformed input.
 * @param {Float64Array} a
 * @param {Float64Array} b
 * @returns {number}
 */
export function box_iou(a, b) {
    const ptr0 = passArrayF64ToWasm0(a, wasm.__wbindgen_malloc);
    const len0 = WASM_VECTOR_LEN;
    const ptr1 = passArrayF64ToWasm0(b, wasm.__wbindgen_malloc);
    const len1 = WASM_VECTOR_LEN;
    const ret = wasm.box_iou(ptr0, len0, ptr1, len1);
    return ret;
}

/**
 * Top-down footprint corners `[x0, z0, x1, z1, x2, z2, x3, z3]` of a box
 * given like [`box_iou`].
 * @param {Float64Array} params
 * @returns {Float64Array}
 */
export function footprint(params) {
    const ptr0 = passArrayF64ToWasm0(params, wasm.__wbindgen_malloc);
    const len0 = WASM_VECTOR_LEN;
    const ret = wasm.footprint(ptr0, len0);
    var v2 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v2;
}

/**
 * Losses at a fixed residual as the predicted uncertainty `u` sweeps
 * `[u_min, u_max]` on `samples` points. Rows are `[u, nll, kld, kld_plus]`
 * where `u` is `b̂` for the Laplace losses and `λσ̂²` for the squared one.
 * Non-finite entries (invalid inputs) come back as NaN.
 * @param {number} residual
 * @param {number} beta
 * @param {number} beta2
 * @param {number} u_min
 * @param {number} u_max
 * @param {number} samples
 * @returns {Float64Array}
 */
export function loss_curves(residual, beta, beta2, u_min, u_max, samples) {
    const ret = wasm.loss_curves(residual, beta, beta2, u_min, u_max, samples);
    var v1 = getArrayF64FromWasm0(ret[0], ret[1]).slice();
    wasm.__wbindgen_free(ret[0], ret[1] * 8, 8);
    return v1;
}

/**
 * Peak height assigned to a keypoint with the given pixel std.
 * @param {number} sigma
 * @returns {number}
 */
export function scale_for_sigma(sigma) {
    const ret = wasm.scale_for_sigma(sigma);
    return ret;
}

/**
 * Best IoU over `samples` rotations of `a` about its vertical axis, as
 * scored for rotationally symmetric objects.
 * @param {Float64Array} a
 * @param {Float64Array} b
 * @param {number} samples
 * @returns {number}
 */
export function symmetric_box_iou(a, b, samples) {
    const ptr0 = passArrayF64ToWasm0(a, wasm.__wbindgen_malloc);
    const len0 = WASM_VECTOR_LEN;
    const ptr1 = passArrayF64ToWasm0(b, wasm.__wbindgen_malloc);
    const len1 = WASM_VECTOR_LEN;
    const ret = wasm.symmetric_box_iou(ptr0, len0, ptr1, len1, samples);
    return ret;
}
function __wbg_get_imports() {
    const import0 = {
        __proto__: null,
        __wbg___wbindgen_throw_41e9ee4f547fc59a: function(arg0, arg1) {
            throw new Error(getStringFromWasm0(arg0, arg1));
        },
        __wbindgen_init_externref_table: function() {
            const table = wasm.__wbindgen_externrefs;
            const offset = table.grow(4);
            table.set(0, undefined);
            table.set(offset + 0, undefined);
            table.set(offset + 1, null);
            table.set(offset + 2, true);
            table.set(offset + 3, false);
        },
    };
    return {
        __proto__: null,
        "./cuboidtrack_wasm_bg.js": import0,
    };
}

const HeatmapDemoFinalization = (typeof FinalizationRegistry === 'undefined')
    ? { register: () => {}, unregister: () => {} }
    : new FinalizationRegistry(ptr => wasm.__wbg_heatmapdemo_free(ptr, 1));

function getArrayF64FromWasm0(ptr, len) {
    ptr = ptr >>> 0;
    return getFloat64ArrayMemory0().subarray(ptr / 8, ptr / 8 + len);
}

let cachedFloat64ArrayMemory0 = null;
function getFloat64ArrayMemory0() {
    if (cachedFloat64ArrayMemory0 === null || cachedFloat64ArrayMemory0.byteLength === 0) {
        cachedFloat64ArrayMemory0 = new Float64Array(wasm.memory.buffer);
    }
    return cachedFloat64ArrayMemory0;
}

function getStringFromWasm0(ptr, len) {
    return decodeText(ptr >>> 0, len);
}

let cachedUint8ArrayMemory0 = null;
function getUint8ArrayMemory0() {
    if (cachedUint8ArrayMemory0 === null || cachedUint8ArrayMemory0.byteLength === 0) {
        cachedUint8ArrayMemory0 = new Uint8Array(wasm.memory.buffer);
    }
    return cachedUint8ArrayMemory0;
}

function passArrayF64ToWasm0(arg, malloc) {
    const ptr = malloc(arg.length * 8, 8) >>> 0;
    getFloat64ArrayMemory0().set(arg, ptr / 8);
    WASM_VECTOR_LEN = arg.length;
    return ptr;
}

let cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
cachedTextDecoder.decode();
const MAX_SAFARI_DECODE_BYTES = 2146435072;
let numBytesDecoded = 0;
function decodeText(ptr, len) {
    numBytesDecoded += len;
    if (numBytesDecoded >= MAX_SAFARI_DECODE_BYTES) {
        cachedTextDecoder = new TextDecoder('utf-8', { ignoreBOM: true, fatal: true });
        cachedTextDecoder.decode();
        numBytesDecoded = len;
    }
    return cachedTextDecoder.decode(getUint8ArrayMemory0().subarray(ptr, ptr + len));
}

let WASM_VECTOR_LEN = 0;

let wasmModule, wasmInstance, wasm;
function __wbg_finalize_init(instance, module) {
    wasmInstance = instance;
    wasm = instance.exports;
    wasmModule = module;
    cachedFloat64ArrayMemory0 = null;
    cachedUint8ArrayMemory0 = null;
    wasm.__wbindgen_start();
    return wasm;
}

async function __wbg_load(module, imports) {
    if (typeof Response === 'function' && module instanceof Response) {
        if (!module.ok) {
            throw new Error(`failed to fetch Wasm: ${module.status} ${module.statusText} fetching '${module.url}'`);
        }

        if (typeof WebAssembly.instantiateStreaming === 'function') {
            try {
                return await WebAssembly.instantiateStreaming(module, imports);
            } catch (e) {
                const validResponse = expectedResponseType(module.type);

                if (validResponse && module.headers.get('Content-Type') !== 'application/wasm') {
                    console.warn("`WebAssembly.instantiateStreaming` failed because your server does not serve Wasm with `application/wasm` MIME type. Falling back to `WebAssembly.instantiate` which is slower. Original error:\n", e);

                } else { throw e; }
            }
        }

        const bytes = await module.arrayBuffer();
        return await WebAssembly.instantiate(bytes, imports);
    } else {
        const instance = await WebAssembly.instantiate(module, imports);

        if (instance instanceof WebAssembly.Instance) {
            return { instance, module };
        } else {
            return instance;
        }
    }

    function expectedResponseType(type) {
        switch (type) {
            case 'basic': case 'cors': case 'default': return true;
        }
        return false;
    }
}

function initSync(module) {
    if (wasm !== undefined) return wasm;


    if (module !== undefined) {
        if (Object.getPrototypeOf(module) === Object.prototype) {
            ({module} = module)
        } else {
            console.warn('using deprecated parameters for `initSync()`; pass a single object instead')
        }
    }

    const imports = __wbg_get_imports();
    if (!(module instanceof WebAssembly.Module)) {
        module = new WebAssembly.Module(module);
    }
    const instance = new WebAssembly.Instance(module, imports);
    return __wbg_finalize_init(instance, module);
}

async function __wbg_init(module_or_path) {
    if (wasm !== undefined) return wasm;


    if (module_or_path !== undefined) {
        if (Object.getPrototypeOf(module_or_path) === Object.prototype) {
            ({module_or_path} = module_or_path)
        } else {
            console.warn('using deprecated parameters for the initialization function; pass a single object instead')
        }
    }

    if (module_or_path === undefined) {
        module_or_path = new URL('cuboidtrack_wasm_bg.wasm', import.meta.url);
    }
    const imports = __wbg_get_imports();

    if (typeof module_or_path === 'string' || (typeof Request === 'function' && module_or_path instanceof Request) || (typeof URL === 'function' && module_or_path instanceof URL)) {
        module_or_path = fetch(module_or_path);
    }

    const { instance, module } = await __wbg_load(await module_or_path, imports);

    return __wbg_finalize_init(instance, module);
}

export { initSync, __wbg_init as default };
