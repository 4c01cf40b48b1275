/**
 * Parser for the diabetes-study TAB distribution (one node file, one
 * directed citation file).
 *
 * NODE.paper.tab: two header lines; the second lists the feature
 * vocabulary as "numeric:<term>:0.0" tokens. Data lines:
 *   <paper_id>\tlabel=<k>\t<term>=<value>...\tsummary=...
 * DIRECTED.cites.tab: two header lines, then
 *   <edge_id>\tpaper:<src>\t|\tpaper:<dst>
 */

import { RawDataset } from "../types.js";

export function parsePubmedTab(nodeFile: string, citesFile: string): RawDataset {
    const nodeLines = nodeFile.split("\n");
    if (nodeLines.length < 3) throw new Error("node file too short");
    const vocabTokens = nodeLines[1].trim().split(/\s+/)
        .filter(t => t.startsWith("numeric:"))
        .map(t => t.split(":")[1]);
    const termIndex = new Map(vocabTokens.map((t, i) => [t, i]));
    const d = vocabTokens.length;

    const idToIndex = new Map<string, number>();
    const rows: Float32Array[] = [];
    const labels: number[] = [];
    for (const line of nodeLines.slice(2)) {
        const trimmed = line.trim();
        if (!trimmed) continue;
        const parts = trimmed.split("\t");
        const id = parts[0];
        const row = new Float32Array(d);
        let label = -1;
        for (const field of parts.slice(1)) {
            const eq = field.indexOf("=");
            if (eq < 0) continue;
            const key = field.slice(0, eq);
            const value = field.slice(eq + 1);
            if (key === "label") {
                label = parseInt(value, 10) - 1;  // labels are 1-based
            } else if (termIndex.has(key)) {
                row[termIndex.get(key)!] = Number(value);
            }
        }
        if (label < 0) throw new Error(`node ${id} has no label`);
        idToIndex.set(id, rows.length);
        rows.push(row);
        labels.push(label);
    }

    const pairs: Array<[number, number]> = [];
    let dropped = 0;
    for (const line of citesFile.split("\n").slice(2)) {
        const trimmed = line.trim();
        if (!trimmed) continue;
        const m = /paper:(\S+)\s*\|\s*paper:(\S+)/.exec(trimmed);
        if (!m) throw new Error(`malformed cites line: ${trimmed.slice(0, 60)}`);
        const u = idToIndex.get(m[1]);
        const v = idToIndex.get(m[2]);
        if (u === undefined || v === undefined) {
            dropped++;
            continue;
        }
        pairs.push([u, v]);
    }

    const features = new Float32Array(rows.length * d);
    rows.forEach((row, i) => features.set(row, i * d));
    const nClasses = Math.max(...labels) + 1;
    return {
        nNodes: rows.length, nFeatures: d, nClasses,
        features, labels, rawPairs: pairs, droppedPairs: dropped,
    };
}
