/**
 * Conversion pipeline: parse a raw distribution, canonicalize the edge
 * set (drop self-loops, symmetrize, dedup, sort), carve a balanced
 * labeled split, validate against published statistics, and emit GVG.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { DATASETS, DatasetConfig } from "./datasets.js";
import { GraphData, decodeGvg, encodeGvg } from "./gvg.js";
import { mulberry32, shuffle } from "./rng.js";
import { parseContentCites } from "./sources/contentCites.js";
import { parseNpzGraph } from "./sources/npzGraph.js";
import { parsePubmedTab } from "./sources/pubmedTab.js";
import { RawDataset } from "./types.js";

export class StatMismatchError extends Error {}

export interface ConvertOptions {
    dataset: string;
    rawDir: string;
    outPath: string;
    seed?: number;
    perClass?: number;
    /** skip the published-statistics validation (custom data) */
    noValidate?: boolean;
    log?: (line: string) => void;
}

/** Symmetrized, deduplicated, (src, dst)-sorted directed edge array. */
export function canonicalizeEdges(pairs: Array<[number, number]>, n: number): Uint32Array {
    const keys = new Set<number>();
    for (const [u, v] of pairs) {
        if (u === v) continue;
        if (u < 0 || v < 0 || u >= n || v >= n) {
            throw new Error(`edge endpoint (${u}, ${v}) out of range for ${n} nodes`);
        }
        keys.add(u * n + v);
        keys.add(v * n + u);
    }
    const sorted = Float64Array.from(keys).sort();
    const out = new Uint32Array(sorted.length * 2);
    sorted.forEach((key, i) => {
        out[2 * i] = Math.floor(key / n);
        out[2 * i + 1] = key % n;
    });
    return out;
}

export function balancedMasks(labels: number[], nClasses: number, perClass: number,
                              seed: number): { train: Uint8Array; test: Uint8Array } {
    const n = labels.length;
    const train = new Uint8Array(n);
    const rand = mulberry32(seed);
    for (let c = 0; c < nClasses; c++) {
        const members = [];
        for (let i = 0; i < n; i++) if (labels[i] === c) members.push(i);
        if (members.length < perClass) {
            throw new Error(`class ${c} has ${members.length} nodes, needs ${perClass}`);
        }
        shuffle(members, rand);
        for (const i of members.slice(0, perClass)) train[i] = 1;
    }
    const test = new Uint8Array(n);
    for (let i = 0; i < n; i++) test[i] = train[i] ? 0 : 1;
    return { train, test };
}

function parseRaw(config: DatasetConfig, rawDir: string): RawDataset {
    const paths = config.files.map(f => join(rawDir, f));
    switch (config.kind) {
        case "content_cites":
            return parseContentCites(readFileSync(paths[0], "utf8"),
                                     readFileSync(paths[1], "utf8"));
        case "pubmed_tab":
            return parsePubmedTab(readFileSync(paths[0], "utf8"),
                                  readFileSync(paths[1], "utf8"));
        case "npz":
            return parseNpzGraph(readFileSync(paths[0]));
    }
}

export function convertDataset(opts: ConvertOptions): GraphData {
    const log = opts.log ?? ((line: string) => console.log(line));
    const config = DATASETS[opts.dataset];
    if (!config) {
        throw new Error(`unknown dataset ${opts.dataset}; known: ${Object.keys(DATASETS).join(", ")}`);
    }
    const raw = parseRaw(config, opts.rawDir);
    const edges = canonicalizeEdges(raw.rawPairs, raw.nNodes);
    const directedEdges = edges.length / 2;
    log(`${opts.dataset}: ${raw.nNodes} nodes, ${raw.rawPairs.length} raw pairs `
        + `(${raw.droppedPairs} dropped), ${directedEdges} directed-stored edges `
        + `after symmetrize+dedup`);

    if (!opts.noValidate) {
        const got = {
            nodes: raw.nNodes,
            directedEdges,
            features: raw.nFeatures,
            classes: raw.nClasses,
        };
        for (const key of Object.keys(config.expected) as Array<keyof typeof got>) {
            if (got[key] !== config.expected[key]) {
                throw new StatMismatchError(
                    `${opts.dataset} ${key}: converted ${got[key]} vs published `
                    + `${config.expected[key]}`);
            }
        }
    }

    const { train, test } = balancedMasks(raw.labels, raw.nClasses,
                                          opts.perClass ?? 20, opts.seed ?? 42);
    const graph: GraphData = {
        nNodes: raw.nNodes,
        nFeatures: raw.nFeatures,
        nClasses: raw.nClasses,
        features: raw.features,
        edges,
        labels: Uint16Array.from(raw.labels),
        trainMask: train,
        valMask: new Uint8Array(raw.nNodes),
        testMask: test,
    };
    const encoded = encodeGvg(graph);
    decodeGvg(encoded);  // self-check: CRC + structural invariants
    writeFileSync(opts.outPath, encoded);
    log(`wrote ${opts.outPath} (${encoded.length} bytes)`);
    return graph;
}
