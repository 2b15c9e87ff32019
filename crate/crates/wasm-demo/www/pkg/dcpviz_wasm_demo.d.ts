/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * GeoJSON FeatureCollection of the month's bands.
     */
    contour(year: number, month: number, thresholds: string): string;
    first_year(): number;
    /**
     * JSON array of `{year, month, value, ri_signed}`.
     */
    heatmap(region: number, retro_start: number, retro_end: number): string;
    last_year(): number;
    constructor(seed: number);
    /**
     * `{"1": "Northeast", ...}`
     */
    regions(): string;
    /**
     * PNG bytes.
     */
    thumbnail(year: number, month: number, thresholds: string, ramp: string, width: number): Uint8Array;
}

/**
 * JSON array of `{lo, hi, color}` legend entries.
 */
export function legend(thresholds: string, ramp: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_contour: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_first_year: (a: number) => number;
    readonly demo_heatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_last_year: (a: number) => number;
    readonly demo_new: (a: number) => [number, number, number];
    readonly demo_regions: (a: number) => [number, number];
    readonly demo_thumbnail: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number, number];
    readonly legend: (a: number, b: number, c: number, d: number) => [number, number, number, number];
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
