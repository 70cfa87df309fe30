/**
 * Subprocess plumbing: every operation goes through the native CLI and
 * its documented file formats. Native execution happens in a separate
 * process, so the JS event loop is never blocked by it.
 */

import { execFile } from "node:child_process";
import { promisify } from "node:util";

import {
  CalibrationParseError,
  CliError,
  FileFormatError,
  StaleCacheError,
} from "./errors.js";

const execFileAsync = promisify(execFile);

export function pythonExecutable(): string {
  return process.env.BEVPOOL_PYTHON ?? "python3";
}

/** A dotted/bracketed field path with no spaces, e.g. cameras[0].fx */
const FIELD_PREFIX = /^([$A-Za-z_][$\w.[\]]*): (.*)$/s;

function classify(stderr: string, exitCode: number | null): Error {
  const line = stderr
    .split("\n")
    .map((s) => s.trim())
    .find((s) => s.startsWith("error: "));
  if (!line) {
    return new CliError(
      `bevpool CLI failed with exit code ${exitCode}`,
      exitCode,
      stderr,
    );
  }
  const message = line.slice("error: ".length);
  if (message.includes("stale")) {
    return new StaleCacheError(message);
  }
  if (message.includes("byte offset") || message.startsWith("bad magic")) {
    return new FileFormatError(message);
  }
  if (message.startsWith("not valid JSON")) {
    return new CalibrationParseError(message);
  }
  const m = FIELD_PREFIX.exec(message);
  if (m) {
    return new CalibrationParseError(message, m[1]);
  }
  return new CliError(message, exitCode, stderr);
}

export async function runCli(args: string[]): Promise<string> {
  try {
    const { stdout } = await execFileAsync(
      pythonExecutable(),
      ["-m", "bevpool.cli", ...args],
      { maxBuffer: 64 * 1024 * 1024 },
    );
    return stdout;
  } catch (err) {
    const e = err as { code?: number | null; stderr?: string; message?: string };
    if (typeof e.stderr === "string") {
      throw classify(e.stderr, e.code ?? null);
    }
    throw err;
  }
}
