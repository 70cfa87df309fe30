/** Error taxonomy of the client, mirroring the CLI's failure modes. */

export class BevPoolClientError extends Error {}

/** Calibration or grid input rejected; `field` names the offending key. */
export class CalibrationParseError extends BevPoolClientError {
  constructor(
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "CalibrationParseError";
  }
}

/** An array had the wrong element type. */
export class DataTypeError extends BevPoolClientError {
  constructor(message: string) {
    super(message);
    this.name = "DataTypeError";
  }
}

/** An array shape disagrees with the handle's rig. */
export class ShapeMismatchError extends BevPoolClientError {
  constructor(
    what: string,
    readonly expected: readonly number[],
    readonly got: readonly number[],
  ) {
    super(
      `${what}: expected shape [${expected.join(", ")}], ` +
        `got [${got.join(", ")}]`,
    );
    this.name = "ShapeMismatchError";
  }
}

/** The cache does not match the rig/grid it is being used with. */
export class StaleCacheError extends BevPoolClientError {
  constructor(message: string) {
    super(message);
    this.name = "StaleCacheError";
  }
}

/** A binary file failed to parse. */
export class FileFormatError extends BevPoolClientError {
  readonly offset?: number;
  constructor(message: string, opts?: { offset?: number }) {
    super(
      opts?.offset !== undefined
        ? `${message} (at byte offset ${opts.offset})`
        : message,
    );
    this.name = "FileFormatError";
    this.offset = opts?.offset;
  }
}

/** The CLI exited nonzero for a reason the client could not classify. */
export class CliError extends BevPoolClientError {
  constructor(
    message: string,
    readonly exitCode: number | null,
    readonly stderr: string,
  ) {
    super(message);
    this.name = "CliError";
  }
}
