/**
 * Parser for the CSR .npz graph distribution used by the co-purchase and
 * large citation datasets: adjacency in adj_data/adj_indices/adj_indptr,
 * features either dense (attr_matrix) or CSR (attr_data/...), integer
 * labels.
 */

import { parseNpz } from "../npz.js";
import { toNumberArray, NpyArray } from "../npy.js";
import { RawDataset } from "../types.js";

function need(map: Map<string, NpyArray>, key: string): NpyArray {
    const arr = map.get(key);
    if (!arr) throw new Error(`npz archive missing array ${key}`);
    return arr;
}

export function parseNpzGraph(buf: Buffer): RawDataset {
    const arrays = parseNpz(buf);
    const indptr = toNumberArray(need(arrays, "adj_indptr"));
    const indices = toNumberArray(need(arrays, "adj_indices"));
    const shape = toNumberArray(need(arrays, "adj_shape"));
    const n = shape[0];
    if (indptr.length !== n + 1) throw new Error("adjacency indptr length mismatch");

    let d: number;
    let features: Float32Array;
    if (arrays.has("attr_matrix")) {
        const dense = need(arrays, "attr_matrix");
        d = dense.shape[1];
        features = Float32Array.from(toNumberArray(dense));
    } else {
        const aShape = toNumberArray(need(arrays, "attr_shape"));
        d = aShape[1];
        features = new Float32Array(n * d);
        const aPtr = toNumberArray(need(arrays, "attr_indptr"));
        const aIdx = toNumberArray(need(arrays, "attr_indices"));
        const aDat = toNumberArray(need(arrays, "attr_data"));
        for (let i = 0; i < n; i++) {
            for (let k = aPtr[i]; k < aPtr[i + 1]; k++) {
                features[i * d + aIdx[k]] = aDat[k];
            }
        }
    }

    const labels = toNumberArray(need(arrays, "labels")).map(v => v | 0);
    if (labels.length !== n) throw new Error("label count mismatch");

    const pairs: Array<[number, number]> = [];
    for (let i = 0; i < n; i++) {
        for (let k = indptr[i]; k < indptr[i + 1]; k++) {
            pairs.push([i, indices[k]]);
        }
    }
    const nClasses = Math.max(...labels) + 1;
    return {
        nNodes: n, nFeatures: d, nClasses,
        features, labels, rawPairs: pairs, droppedPairs: 0,
    };
}
