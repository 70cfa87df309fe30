/**
 * Binary tensor files ("BVPT"), mirroring the native library's format:
 * magic "BVPT", version u16, dtype code u8 (0 = float32), ndim u8,
 * then ndim u32 dims and the row-major float32 payload, little-endian.
 */

import { DataTypeError, FileFormatError } from "./errors.js";

const MAGIC = "BVPT";
const VERSION = 1;
const DTYPE_F32 = 0;

export interface Tensor {
  data: Float32Array;
  shape: number[];
}

let ingressCopies = 0;

/** Number of array payload copies made while serializing (debug aid). */
export function ingressCopyCount(): number {
  return ingressCopies;
}

export function resetIngressCopyCount(): void {
  ingressCopies = 0;
}

function elementCount(shape: readonly number[]): number {
  let n = 1;
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 0) {
      throw new FileFormatError(`invalid dimension ${dim}`);
    }
    n *= dim;
  }
  return n;
}

export function serializeTensor(
  data: Float32Array,
  shape: readonly number[],
): Buffer {
  if (!(data instanceof Float32Array)) {
    throw new DataTypeError("tensor payload must be a Float32Array");
  }
  const count = elementCount(shape);
  if (count !== data.length) {
    throw new FileFormatError(
      `shape [${shape.join(", ")}] implies ${count} elements, ` +
        `got ${data.length}`,
    );
  }
  const header = Buffer.alloc(8 + 4 * shape.length);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt16LE(VERSION, 4);
  header.writeUInt8(DTYPE_F32, 6);
  header.writeUInt8(shape.length, 7);
  shape.forEach((dim, i) => header.writeUInt32LE(dim, 8 + 4 * i));
  // the single ingress copy of the caller's array
  const payload = Buffer.from(data.buffer, data.byteOffset, data.byteLength);
  ingressCopies += 1;
  return Buffer.concat([header, Buffer.from(payload)]);
}

export function deserializeTensor(buf: Buffer): Tensor {
  if (buf.length < 8) {
    throw new FileFormatError("truncated header", { offset: buf.length });
  }
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new FileFormatError(`bad magic, expected ${MAGIC}`, { offset: 0 });
  }
  const version = buf.readUInt16LE(4);
  if (version !== VERSION) {
    throw new FileFormatError(`unsupported version ${version}`, { offset: 4 });
  }
  const dtype = buf.readUInt8(6);
  if (dtype !== DTYPE_F32) {
    throw new FileFormatError(`unsupported dtype code ${dtype}`, { offset: 6 });
  }
  const ndim = buf.readUInt8(7);
  if (buf.length < 8 + 4 * ndim) {
    throw new FileFormatError("truncated shape", { offset: buf.length });
  }
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) {
    shape.push(buf.readUInt32LE(8 + 4 * i));
  }
  const count = elementCount(shape);
  const start = 8 + 4 * ndim;
  if (buf.length !== start + 4 * count) {
    throw new FileFormatError(
      `payload length ${buf.length - start} does not match shape ` +
        `[${shape.join(", ")}]`,
      { offset: start },
    );
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    data[i] = buf.readFloatLE(start + 4 * i);
  }
  return { data, shape };
}
