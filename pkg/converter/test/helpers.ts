/** Builders for synthetic npy/npz bytes so archive parsing is testable. */

import { deflateRawSync, crc32 } from "node:zlib";

export function makeNpy(descr: string, shape: number[], values: number[]): Buffer {
    const header = `{'descr': '${descr}', 'fortran_order': False, `
        + `'shape': (${shape.join(", ")}${shape.length === 1 ? "," : ""}), }`;
    const padded = header + " ".repeat((64 - ((10 + header.length + 1) % 64)) % 64) + "\n";
    const head = Buffer.alloc(10 + padded.length);
    head[0] = 0x93;
    head.write("NUMPY", 1, "ascii");
    head[6] = 1;
    head[7] = 0;
    head.writeUInt16LE(padded.length, 8);
    head.write(padded, 10, "ascii");

    const size = { "<i4": 4, "<i8": 8, "<f4": 4, "<f8": 8, "|b1": 1, "|u1": 1 }[descr];
    if (!size) throw new Error(`helper cannot encode ${descr}`);
    const data = Buffer.alloc(values.length * size);
    values.forEach((v, i) => {
        if (descr === "<i4") data.writeInt32LE(v, i * 4);
        else if (descr === "<i8") data.writeBigInt64LE(BigInt(v), i * 8);
        else if (descr === "<f4") data.writeFloatLE(v, i * 4);
        else if (descr === "<f8") data.writeDoubleLE(v, i * 8);
        else data.writeUInt8(v, i);
    });
    return Buffer.concat([head, data]);
}

export function makeZip(entries: Array<{ name: string; data: Buffer }>,
                        compress = false): Buffer {
    const locals: Buffer[] = [];
    const centrals: Buffer[] = [];
    let offset = 0;
    for (const { name, data } of entries) {
        const payload = compress ? deflateRawSync(data) : data;
        const method = compress ? 8 : 0;
        const crc = crc32(data) >>> 0;
        const local = Buffer.alloc(30 + name.length);
        local.writeUInt32LE(0x04034b50, 0);
        local.writeUInt16LE(20, 4);
        local.writeUInt16LE(0, 6);
        local.writeUInt16LE(method, 8);
        local.writeUInt32LE(crc, 14);
        local.writeUInt32LE(payload.length, 18);
        local.writeUInt32LE(data.length, 22);
        local.writeUInt16LE(name.length, 26);
        local.write(name, 30, "ascii");
        locals.push(local, payload);

        const central = Buffer.alloc(46 + name.length);
        central.writeUInt32LE(0x02014b50, 0);
        central.writeUInt16LE(20, 4);
        central.writeUInt16LE(20, 6);
        central.writeUInt16LE(method, 10);
        central.writeUInt32LE(crc, 16);
        central.writeUInt32LE(payload.length, 20);
        central.writeUInt32LE(data.length, 24);
        central.writeUInt16LE(name.length, 28);
        central.writeUInt32LE(offset, 42);
        central.write(name, 46, "ascii");
        centrals.push(central);
        offset += local.length + payload.length;
    }
    const centralBlob = Buffer.concat(centrals);
    const eocd = Buffer.alloc(22);
    eocd.writeUInt32LE(0x06054b50, 0);
    eocd.writeUInt16LE(entries.length, 8);
    eocd.writeUInt16LE(entries.length, 10);
    eocd.writeUInt32LE(centralBlob.length, 12);
    eocd.writeUInt32LE(offset, 16);
    return Buffer.concat([...locals, centralBlob, eocd]);
}
