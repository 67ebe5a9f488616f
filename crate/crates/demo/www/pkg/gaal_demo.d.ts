/* tslint:disable */
/* eslint-disable */

export class Projection {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly applied: boolean;
    readonly cos_after: number;
    readonly cos_before: number;
    readonly g_tilde: Float64Array;
    readonly v: number;
}

export class RunSummary {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Validation fused accuracy per epoch.
     */
    readonly acc_multi: Float64Array;
    /**
     * Cosine between consecutive applied head directions, one per step.
     */
    readonly cos_prev: Float64Array;
    readonly loss_image: Float64Array;
    readonly loss_tabular: Float64Array;
    /**
     * Test accuracy `[fused, image, tabular]`.
     */
    readonly test: Float64Array;
}

export class Selection {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly entropies: Float64Array;
    readonly hard: Uint32Array;
    /**
     * Row-major softmax probabilities.
     */
    readonly probs: Float64Array;
}

/**
 * Softmax entropies of a row-major logit batch and the `⌈λB⌉` most
 * uncertain rows.
 */
export function hard_samples(logits: Float64Array, classes: number, lambda: number): Selection;

/**
 * Projects `g` against the reference direction `g_p`. With `orthogonal` the
 * `g_p` component is always removed instead of enforcing the margin.
 */
export function project(g: Float64Array, g_p: Float64Array, epsilon: number, orthogonal: boolean): Projection;

/**
 * Trains on a small synthetic problem and returns the learning curves.
 */
export function train_run(seed: number, n: number, epochs: number, baseline: string, surgery: boolean): RunSummary;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_projection_free: (a: number, b: number) => void;
    readonly __wbg_runsummary_free: (a: number, b: number) => void;
    readonly __wbg_selection_free: (a: number, b: number) => void;
    readonly hard_samples: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly project: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly projection_applied: (a: number) => number;
    readonly projection_cos_after: (a: number) => number;
    readonly projection_cos_before: (a: number) => number;
    readonly projection_g_tilde: (a: number) => [number, number];
    readonly projection_v: (a: number) => number;
    readonly runsummary_acc_multi: (a: number) => [number, number];
    readonly runsummary_cos_prev: (a: number) => [number, number];
    readonly runsummary_loss_image: (a: number) => [number, number];
    readonly runsummary_loss_tabular: (a: number) => [number, number];
    readonly runsummary_test: (a: number) => [number, number];
    readonly selection_entropies: (a: number) => [number, number];
    readonly selection_hard: (a: number) => [number, number];
    readonly selection_probs: (a: number) => [number, number];
    readonly train_run: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
