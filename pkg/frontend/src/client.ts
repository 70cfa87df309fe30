/**
 * The two bound operations: cache construction and pooling dispatch.
 *
 * A handle owns the serialized association cache (byte-identical to a
 * native cache-build) plus the calibration and grid it was built from;
 * pooling validates array shapes against the handle before anything is
 * written, serializes each array exactly once, and round-trips through
 * the CLI's tensor files.
 */

import { mkdtemp, readFile, rm, writeFile } from "node:fs/promises";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { runCli } from "./cli.js";
import {
  DataTypeError,
  FileFormatError,
  ShapeMismatchError,
} from "./errors.js";
import { deserializeTensor, serializeTensor, type Tensor } from "./tensor.js";

export type Backend = "naive" | "prefixsum" | "interval";
export type ReducerName = "sum" | "mean" | "max";

export interface GridParams {
  /** half extent E in meters; the grid covers x, y in [-E, E) */
  extent: number;
  /** cell size r in meters */
  cellSize: number;
}

export interface BoundHandle {
  /** serialized cache, byte-identical to `bevpool cache-build` output */
  readonly cacheBytes: Buffer;
  /** fingerprint of (rig, frustum, grid) from the cache header */
  readonly fingerprint: bigint;
  readonly calibrationJson: string;
  readonly grid: GridParams;
  readonly cameras: number;
  readonly height: number;
  readonly width: number;
  readonly depthBins: number;
}

function gridArgs(grid: GridParams): string[] {
  return [
    "--grid-extent",
    String(grid.extent),
    "--cell-size",
    String(grid.cellSize),
  ];
}

async function inScratchDir<T>(fn: (dir: string) => Promise<T>): Promise<T> {
  const dir = await mkdtemp(join(tmpdir(), "bevpool-"));
  try {
    return await fn(dir);
  } finally {
    await rm(dir, { recursive: true, force: true });
  }
}

function parseCacheFingerprint(bytes: Buffer): bigint {
  if (bytes.length < 14 || bytes.toString("ascii", 0, 4) !== "BVPC") {
    throw new FileFormatError("not a cache file (bad magic)", { offset: 0 });
  }
  return bytes.readBigUInt64LE(6);
}

/**
 * Build the association cache for a calibration document and grid.
 *
 * The JSON text is validated by the native side; parse failures carry
 * the offending field name.
 */
export async function buildCache(
  calibrationJson: string,
  grid: GridParams,
): Promise<BoundHandle> {
  const cacheBytes = await inScratchDir(async (dir) => {
    const calibPath = join(dir, "calibration.json");
    const outPath = join(dir, "cache.bvpc");
    await writeFile(calibPath, calibrationJson, "utf-8");
    await runCli([
      "cache-build",
      "--calib",
      calibPath,
      ...gridArgs(grid),
      "--out",
      outPath,
    ]);
    return readFile(outPath);
  });
  // the CLI accepted the document, so this parse cannot fail
  const doc = JSON.parse(calibrationJson) as {
    cameras: unknown[];
    frustum: { h: number; w: number; d_bins: number };
  };
  return {
    cacheBytes,
    fingerprint: parseCacheFingerprint(cacheBytes),
    calibrationJson,
    grid,
    cameras: doc.cameras.length,
    height: doc.frustum.h,
    width: doc.frustum.w,
    depthBins: doc.frustum.d_bins,
  };
}

function checkInput(
  what: string,
  tensor: Tensor,
  expected: readonly number[],
): void {
  if (!(tensor.data instanceof Float32Array)) {
    throw new DataTypeError(`${what}: payload must be a Float32Array`);
  }
  const got = tensor.shape;
  const ok =
    got.length === expected.length &&
    expected.every((dim, i) => dim === -1 || got[i] === dim);
  if (!ok) {
    throw new ShapeMismatchError(what, expected, got);
  }
}

export interface PoolOptions {
  backend?: Backend;
  reducer?: ReducerName;
  /** override the handle's grid (mismatches surface as stale-cache errors) */
  grid?: GridParams;
}

/**
 * Pool camera features through the handle's cache into a BEV map.
 *
 * `features` is (N, C, H, W) and `logits` (N, D, H, W), both float32;
 * the result is (C, nx, ny). Numerically identical to running
 * `bevpool pool` on the same serialized inputs, because it is that.
 */
export async function pool(
  handle: BoundHandle,
  features: Tensor,
  logits: Tensor,
  options: PoolOptions = {},
): Promise<Tensor> {
  const { cameras: n, height: h, width: w, depthBins: d } = handle;
  checkInput("features", features, [n, -1, h, w]);
  checkInput("logits", logits, [n, d, h, w]);
  const backend = options.backend ?? "interval";
  const reducer = options.reducer ?? "sum";
  const grid = options.grid ?? handle.grid;
  return inScratchDir(async (dir) => {
    const paths = {
      calib: join(dir, "calibration.json"),
      features: join(dir, "features.bvpt"),
      logits: join(dir, "logits.bvpt"),
      cache: join(dir, "cache.bvpc"),
      out: join(dir, "bev.bvpt"),
    };
    await writeFile(paths.calib, handle.calibrationJson, "utf-8");
    await writeFile(paths.features, serializeTensor(features.data, features.shape));
    await writeFile(paths.logits, serializeTensor(logits.data, logits.shape));
    await writeFile(paths.cache, handle.cacheBytes);
    await runCli([
      "pool",
      "--calib", paths.calib,
      "--features", paths.features,
      "--logits", paths.logits,
      "--cache", paths.cache,
      ...gridArgs(grid),
      "--backend", backend,
      "--reducer", reducer,
      "--out", paths.out,
    ]);
    return deserializeTensor(await readFile(paths.out));
  });
}
