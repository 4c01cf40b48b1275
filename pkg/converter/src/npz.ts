/**
 * Just enough of a ZIP reader for .npz archives: central-directory walk,
 * stored and deflated entries.
 */

import { inflateRawSync } from "node:zlib";
import { parseNpy, NpyArray } from "./npy.js";

const EOCD_SIG = 0x06054b50;
const CDIR_SIG = 0x02014b50;
const LOCAL_SIG = 0x04034b50;

interface Entry {
    name: string;
    method: number;
    compressedSize: number;
    localOffset: number;
}

function findEocd(buf: Buffer): number {
    const min = Math.max(0, buf.length - 65557);
    for (let i = buf.length - 22; i >= min; i--) {
        if (buf.readUInt32LE(i) === EOCD_SIG) return i;
    }
    throw new Error("not a zip archive (no end-of-central-directory)");
}

function readEntries(buf: Buffer): Entry[] {
    const eocd = findEocd(buf);
    const count = buf.readUInt16LE(eocd + 10);
    let pos = buf.readUInt32LE(eocd + 16);
    const entries: Entry[] = [];
    for (let i = 0; i < count; i++) {
        if (buf.readUInt32LE(pos) !== CDIR_SIG) throw new Error("corrupt central directory");
        const method = buf.readUInt16LE(pos + 10);
        const compressedSize = buf.readUInt32LE(pos + 20);
        const nameLen = buf.readUInt16LE(pos + 28);
        const extraLen = buf.readUInt16LE(pos + 30);
        const commentLen = buf.readUInt16LE(pos + 32);
        const localOffset = buf.readUInt32LE(pos + 42);
        const name = buf.toString("utf8", pos + 46, pos + 46 + nameLen);
        entries.push({ name, method, compressedSize, localOffset });
        pos += 46 + nameLen + extraLen + commentLen;
    }
    return entries;
}

function entryData(buf: Buffer, e: Entry): Buffer {
    if (buf.readUInt32LE(e.localOffset) !== LOCAL_SIG) {
        throw new Error(`corrupt local header for ${e.name}`);
    }
    const nameLen = buf.readUInt16LE(e.localOffset + 26);
    const extraLen = buf.readUInt16LE(e.localOffset + 28);
    const start = e.localOffset + 30 + nameLen + extraLen;
    const raw = buf.subarray(start, start + e.compressedSize);
    if (e.method === 0) return Buffer.from(raw);
    if (e.method === 8) return inflateRawSync(raw);
    throw new Error(`unsupported zip compression method ${e.method}`);
}

/** Every array in the archive, keyed by entry name without ".npy". */
export function parseNpz(buf: Buffer): Map<string, NpyArray> {
    const out = new Map<string, NpyArray>();
    for (const entry of readEntries(buf)) {
        const key = entry.name.endsWith(".npy")
            ? entry.name.slice(0, -4) : entry.name;
        out.set(key, parseNpy(entryData(buf, entry)));
    }
    return out;
}
