/**
 * Parser for the .content/.cites citation-network text distribution.
 *
 * <name>.content lines: <paper_id> <feat_0> ... <feat_{d-1}> <class_name>
 * <name>.cites lines:   <cited_id> <citing_id>
 *
 * Paper ids are opaque strings; citations touching unknown ids are
 * dropped (the public files contain a few of those). Class names map to
 * indices in sorted order so the assignment is reproducible.
 */

import { RawDataset } from "../types.js";

export function parseContentCites(content: string, cites: string): RawDataset {
    const idToIndex = new Map<string, number>();
    const featureRows: number[][] = [];
    const classPerNode: string[] = [];

    for (const line of content.split("\n")) {
        const trimmed = line.trim();
        if (!trimmed) continue;
        const parts = trimmed.split(/\s+/);
        if (parts.length < 3) throw new Error(`malformed content line: ${trimmed.slice(0, 60)}`);
        const id = parts[0];
        if (idToIndex.has(id)) throw new Error(`duplicate paper id ${id}`);
        idToIndex.set(id, featureRows.length);
        featureRows.push(parts.slice(1, -1).map(Number));
        classPerNode.push(parts[parts.length - 1]);
    }
    const d = featureRows[0]?.length ?? 0;
    for (const row of featureRows) {
        if (row.length !== d) throw new Error("inconsistent feature width in content file");
    }
    const classNames = [...new Set(classPerNode)].sort();
    const classToIndex = new Map(classNames.map((name, i) => [name, i]));
    const labels = classPerNode.map(name => classToIndex.get(name)!);

    const pairs: Array<[number, number]> = [];
    let dropped = 0;
    for (const line of cites.split("\n")) {
        const trimmed = line.trim();
        if (!trimmed) continue;
        const parts = trimmed.split(/\s+/);
        if (parts.length !== 2) throw new Error(`malformed cites line: ${trimmed.slice(0, 60)}`);
        const u = idToIndex.get(parts[0]);
        const v = idToIndex.get(parts[1]);
        if (u === undefined || v === undefined) {
            dropped++;
            continue;
        }
        pairs.push([u, v]);
    }

    const features = new Float32Array(featureRows.length * d);
    featureRows.forEach((row, i) => features.set(row, i * d));
    return {
        nNodes: featureRows.length,
        nFeatures: d,
        nClasses: classNames.length,
        features,
        labels,
        rawPairs: pairs,
        droppedPairs: dropped,
    };
}
