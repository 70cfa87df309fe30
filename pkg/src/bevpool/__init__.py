"""Camera-to-BEV view transformation with precomputed grid association
and interval-reduction pooling, plus the prefix-sum baseline it
replaces, LiDAR flattening, and shared-BEV fusion."""

__version__ = "0.1.0"

from .bevgrid import (
    DEFAULT_GRID,
    OUT_OF_RANGE,
    AssociationCache,
    BevGridSpec,
    build_cache,
    deserialize_cache,
    load_cache,
    quantize,
    quantize_points,
    save_cache,
    serialize_cache,
    validate_cache,
)
from .errors import (
    BehindCameraError,
    BevPoolError,
    ConfigurationError,
    FileFormatError,
    StaleCacheError,
    UnsupportedReducerError,
    ValidationError,
)
from .fusion import bev_encoder, fuse_concat, grid_resample, lidar_to_bev
from .geometry import (
    CameraCalibration,
    FrustumPoints,
    FrustumSpec,
    depth_of_bin,
    generate_frustum,
    load_calibration,
    parse_calibration,
    project,
    save_calibration,
    unproject,
)
from .lift import check_depth_distribution, normalize_depth, point_weight
from .pooling import (
    BACKENDS,
    BevFeatureMap,
    Reducer,
    get_parallelism,
    pool,
    pool_interval,
    pool_naive,
    pool_prefixsum,
    reorder_weights,
    set_parallelism,
)
from .tensorio import load_tensor, save_tensor
from .workload import WorkloadSpec, gen_workload, standard_spec, synthetic_rig
