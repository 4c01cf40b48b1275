/** Shared shape every source-format parser produces. */

export interface RawDataset {
    nNodes: number;
    nFeatures: number;
    nClasses: number;
    /** row-major nNodes x nFeatures */
    features: Float32Array;
    /** class index per node */
    labels: number[];
    /** directed pairs exactly as distributed (before symmetrization) */
    rawPairs: Array<[number, number]>;
    /** citations dropped because an endpoint id was unknown */
    droppedPairs: number;
}
