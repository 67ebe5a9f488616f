/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_projection_free: (a: number, b: number) => void;
export const __wbg_runsummary_free: (a: number, b: number) => void;
export const __wbg_selection_free: (a: number, b: number) => void;
export const hard_samples: (a: number, b: number, c: number, d: number) => [number, number, number];
export const project: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const projection_applied: (a: number) => number;
export const projection_cos_after: (a: number) => number;
export const projection_cos_before: (a: number) => number;
export const projection_g_tilde: (a: number) => [number, number];
export const projection_v: (a: number) => number;
export const runsummary_acc_multi: (a: number) => [number, number];
export const runsummary_cos_prev: (a: number) => [number, number];
export const runsummary_loss_image: (a: number) => [number, number];
export const runsummary_loss_tabular: (a: number) => [number, number];
export const runsummary_test: (a: number) => [number, number];
export const selection_entropies: (a: number) => [number, number];
export const selection_hard: (a: number) => [number, number];
export const selection_probs: (a: number) => [number, number];
export const train_run: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
