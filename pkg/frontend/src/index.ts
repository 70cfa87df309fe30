/** bevpool-client: drive bevpool cache construction and BEV pooling
 * from TypeScript through the CLI's documented file formats. */

export const VERSION = "0.1.0";

export {
  buildCache,
  pool,
  type Backend,
  type BoundHandle,
  type GridParams,
  type PoolOptions,
  type ReducerName,
} from "./client.js";
export {
  BevPoolClientError,
  CalibrationParseError,
  CliError,
  DataTypeError,
  FileFormatError,
  ShapeMismatchError,
  StaleCacheError,
} from "./errors.js";
export { pythonExecutable, runCli } from "./cli.js";
export {
  deserializeTensor,
  ingressCopyCount,
  resetIngressCopyCount,
  serializeTensor,
  type Tensor,
} from "./tensor.js";
