/**
 * GVG v1 container writer/reader (little-endian, CRC32 footer).
 *
 * Layout: magic "GVLT" | u16 version | u32 nNodes | u32 nFeatures |
 * u32 nEdges (directed-stored) | u16 nClasses | f32 features row-major |
 * (u32 src, u32 dst) per edge | u16 label per node | three LSB-first mask
 * bitsets of ceil(n/8) bytes (train, val, test) | u32 CRC32 of everything
 * before the footer.
 */

import { crc32 } from "node:zlib";

export const GVG_MAGIC = "GVLT";
export const GVG_VERSION = 1;

export interface GraphData {
    nNodes: number;
    nFeatures: number;
    nClasses: number;
    /** row-major nNodes x nFeatures */
    features: Float32Array;
    /** flattened (src, dst) pairs, directed-stored */
    edges: Uint32Array;
    labels: Uint16Array;
    trainMask: Uint8Array;   // one byte per node, 0/1
    valMask: Uint8Array;
    testMask: Uint8Array;
}

function packMask(mask: Uint8Array): Uint8Array {
    const out = new Uint8Array(Math.ceil(mask.length / 8));
    for (let i = 0; i < mask.length; i++) {
        if (mask[i]) out[i >> 3] |= 1 << (i & 7);
    }
    return out;
}

function unpackMask(bytes: Uint8Array, n: number): Uint8Array {
    const out = new Uint8Array(n);
    for (let i = 0; i < n; i++) {
        out[i] = (bytes[i >> 3] >> (i & 7)) & 1;
    }
    return out;
}

export function encodeGvg(g: GraphData): Buffer {
    const nEdges = g.edges.length / 2;
    if (!Number.isInteger(nEdges)) throw new Error("edge array length must be even");
    if (g.features.length !== g.nNodes * g.nFeatures) {
        throw new Error("feature array size mismatch");
    }
    if (g.labels.length !== g.nNodes) throw new Error("label array size mismatch");

    const header = Buffer.alloc(4 + 2 + 4 + 4 + 4 + 2);
    header.write(GVG_MAGIC, 0, "ascii");
    header.writeUInt16LE(GVG_VERSION, 4);
    header.writeUInt32LE(g.nNodes, 6);
    header.writeUInt32LE(g.nFeatures, 10);
    header.writeUInt32LE(nEdges, 14);
    header.writeUInt16LE(g.nClasses, 18);

    const features = Buffer.alloc(4 * g.features.length);
    for (let i = 0; i < g.features.length; i++) features.writeFloatLE(g.features[i], 4 * i);
    const edges = Buffer.alloc(4 * g.edges.length);
    for (let i = 0; i < g.edges.length; i++) edges.writeUInt32LE(g.edges[i], 4 * i);
    const labels = Buffer.alloc(2 * g.labels.length);
    for (let i = 0; i < g.labels.length; i++) labels.writeUInt16LE(g.labels[i], 2 * i);

    const body = Buffer.concat([
        header, features, edges, labels,
        Buffer.from(packMask(g.trainMask)),
        Buffer.from(packMask(g.valMask)),
        Buffer.from(packMask(g.testMask)),
    ]);
    const footer = Buffer.alloc(4);
    footer.writeUInt32LE(crc32(body) >>> 0, 0);
    return Buffer.concat([body, footer]);
}

/** Minimal reader used for converter self-checks and tests. */
export function decodeGvg(buf: Buffer): GraphData {
    if (buf.length < 24) throw new Error("truncated: shorter than any valid container");
    if (buf.toString("ascii", 0, 4) !== GVG_MAGIC) throw new Error("bad magic");
    const version = buf.readUInt16LE(4);
    if (version !== GVG_VERSION) throw new Error(`unsupported version ${version}`);
    const nNodes = buf.readUInt32LE(6);
    const nFeatures = buf.readUInt32LE(10);
    const nEdges = buf.readUInt32LE(14);
    const nClasses = buf.readUInt16LE(18);
    const maskBytes = Math.ceil(nNodes / 8);
    const total = 20 + 4 * nNodes * nFeatures + 8 * nEdges + 2 * nNodes + 3 * maskBytes + 4;
    if (buf.length !== total) {
        throw new Error(`truncated: expected ${total} bytes, found ${buf.length}`);
    }
    const stored = buf.readUInt32LE(buf.length - 4);
    const actual = crc32(buf.subarray(0, buf.length - 4)) >>> 0;
    if (stored !== actual) throw new Error("checksum mismatch");

    let pos = 20;
    const features = new Float32Array(nNodes * nFeatures);
    for (let i = 0; i < features.length; i++, pos += 4) features[i] = buf.readFloatLE(pos);
    const edges = new Uint32Array(2 * nEdges);
    for (let i = 0; i < edges.length; i++, pos += 4) edges[i] = buf.readUInt32LE(pos);
    const labels = new Uint16Array(nNodes);
    for (let i = 0; i < nNodes; i++, pos += 2) labels[i] = buf.readUInt16LE(pos);
    const trainMask = unpackMask(buf.subarray(pos, pos + maskBytes), nNodes);
    pos += maskBytes;
    const valMask = unpackMask(buf.subarray(pos, pos + maskBytes), nNodes);
    pos += maskBytes;
    const testMask = unpackMask(buf.subarray(pos, pos + maskBytes), nNodes);
    for (const e of edges) {
        if (e >= nNodes) throw new Error(`edge endpoint ${e} out of range`);
    }
    return { nNodes, nFeatures, nClasses, features, edges, labels, trainMask, valMask, testMask };
}
