/**
 * Named datasets, their raw-file layout, and the published statistics
 * each conversion must reproduce exactly (directed-stored edge counts,
 * i.e. after symmetrization and dedup).
 */

export type SourceKind = "content_cites" | "pubmed_tab" | "npz";

export interface DatasetConfig {
    kind: SourceKind;
    /** file names looked up inside --raw-dir */
    files: string[];
    expected: {
        nodes: number;
        directedEdges: number;
        features: number;
        classes: number;
    };
}

export const DATASETS: Record<string, DatasetConfig> = {
    cora: {
        kind: "content_cites",
        files: ["cora.content", "cora.cites"],
        expected: { nodes: 2708, directedEdges: 10556, features: 1433, classes: 7 },
    },
    citeseer: {
        kind: "content_cites",
        files: ["citeseer.content", "citeseer.cites"],
        expected: { nodes: 3327, directedEdges: 9104, features: 3703, classes: 6 },
    },
    pubmed: {
        kind: "pubmed_tab",
        files: ["Pubmed-Diabetes.NODE.paper.tab", "Pubmed-Diabetes.DIRECTED.cites.tab"],
        expected: { nodes: 19717, directedEdges: 88648, features: 500, classes: 3 },
    },
    computer: {
        kind: "npz",
        files: ["amazon_electronics_computers.npz"],
        expected: { nodes: 13752, directedEdges: 491722, features: 767, classes: 10 },
    },
    photo: {
        kind: "npz",
        files: ["amazon_electronics_photo.npz"],
        expected: { nodes: 7650, directedEdges: 238162, features: 745, classes: 8 },
    },
    corafull: {
        kind: "npz",
        files: ["cora_full.npz"],
        expected: { nodes: 19793, directedEdges: 126842, features: 8710, classes: 70 },
    },
};
