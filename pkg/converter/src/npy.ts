/** Parser for .npy arrays (the entries inside an .npz archive). */

export type NpyData = Int32Array | BigInt64Array | Float32Array | Float64Array
    | Uint8Array | Uint32Array;

export interface NpyArray {
    descr: string;
    shape: number[];
    data: NpyData;
}

export function parseNpy(buf: Buffer): NpyArray {
    if (buf.length < 10 || buf[0] !== 0x93 || buf.toString("ascii", 1, 6) !== "NUMPY") {
        throw new Error("not an npy array");
    }
    const major = buf[6];
    const headerLen = major >= 2 ? buf.readUInt32LE(8) : buf.readUInt16LE(8);
    const headerEnd = (major >= 2 ? 12 : 10) + headerLen;
    const header = buf.toString("ascii", major >= 2 ? 12 : 10, headerEnd);

    const descr = /['"]descr['"]\s*:\s*['"]([^'"]+)['"]/.exec(header)?.[1];
    const fortran = /['"]fortran_order['"]\s*:\s*(True|False)/.exec(header)?.[1];
    const shapeStr = /['"]shape['"]\s*:\s*\(([^)]*)\)/.exec(header)?.[1];
    if (!descr || !fortran || shapeStr === undefined) {
        throw new Error(`unparseable npy header: ${header}`);
    }
    if (fortran === "True") throw new Error("fortran-ordered arrays unsupported");
    const shape = shapeStr.split(",").map(s => s.trim()).filter(s => s.length)
        .map(s => parseInt(s, 10));
    const count = shape.reduce((a, b) => a * b, 1);
    const payload = buf.subarray(headerEnd);

    // copy into an aligned buffer; payload offsets need not be element-aligned
    const aligned = (bytes: number) => {
        const out = Buffer.alloc(count * bytes);
        payload.copy(out, 0, 0, count * bytes);
        return out;
    };
    let data: NpyData;
    switch (descr) {
        case "<i4": data = new Int32Array(aligned(4).buffer, 0, count); break;
        case "<u4": data = new Uint32Array(aligned(4).buffer, 0, count); break;
        case "<i8": data = new BigInt64Array(aligned(8).buffer, 0, count); break;
        case "<f4": data = new Float32Array(aligned(4).buffer, 0, count); break;
        case "<f8": data = new Float64Array(aligned(8).buffer, 0, count); break;
        case "|b1":
        case "|u1": data = new Uint8Array(aligned(1).buffer, 0, count); break;
        default: throw new Error(`unsupported npy dtype ${descr}`);
    }
    return { descr, shape, data };
}

/** Lossy-but-checked conversion to plain numbers. */
export function toNumberArray(arr: NpyArray): number[] {
    const out = new Array<number>(arr.data.length);
    for (let i = 0; i < arr.data.length; i++) {
        const v = arr.data[i];
        out[i] = typeof v === "bigint" ? Number(v) : (v as number);
    }
    return out;
}
