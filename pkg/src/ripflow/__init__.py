"""Rip current detection from nearshore video via dense optical flow.

Pipeline: adjacent frame pairs yield velocity fields; shore/wave masks
restrict analysis to open sea; the shoreline distance matrix (plus a
skyline focal point when present) defines per-pixel offshore directions;
pixels moving offshore are counted over a time window into a likelihood
matrix, evaluated against ground truth with pixel-level PR/AUC.
"""

from .detect import LikelihoodMatrix, accumulate, rip_region, run_detection
from .errors import (
    ConfigError,
    DimensionError,
    InputError,
    InsufficientDataError,
    NoCoastlineError,
    NumericalError,
    RipflowError,
    UndefinedGroundTruthError,
    UnsupportedInputError,
)
from .frame_io import (
    BinaryMask,
    Frame,
    FrameSequence,
    MaskKind,
    load_frame,
    load_mask,
    load_sequence,
    save_mask,
)
from .geometry import (
    DirectionField,
    DistanceMatrix,
    Shoreline,
    Skyline,
    aggregate_offshore,
    detect_coastline,
    detect_skyline,
    distance_matrix,
    global_offshore,
    local_offshore,
    offshore_field,
)
from .metrics import PRCurve, mask_iou_f1, pr_curve, precision_recall, threshold_region
from .optflow import (
    FlowConfig,
    FlowMethod,
    GradientFields,
    VelocityField,
    compute_gradients,
    dfd,
    estimate_flow,
    hor_variant,
    horn_schunck,
    lucas_kanade,
    smooth_velocity,
)
from .segmentation import combined_mask, shore_mask, wave_mask
from .synthlab import (
    JetSpec,
    SceneSpec,
    ground_truth_flow,
    render_sequence,
    scene_from_toml,
    write_scene,
)
from .viz import (
    BlockMeans,
    block_average,
    build_colormap,
    drifter_grid,
    quiver_arrows,
    render_drifters,
    render_heatmap,
    render_quiver,
    simulate_drifters,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "BlockMeans",
    "ConfigError",
    "DimensionError",
    "DirectionField",
    "DistanceMatrix",
    "FlowConfig",
    "FlowMethod",
    "Frame",
    "FrameSequence",
    "GradientFields",
    "InputError",
    "InsufficientDataError",
    "JetSpec",
    "LikelihoodMatrix",
    "MaskKind",
    "NoCoastlineError",
    "NumericalError",
    "PRCurve",
    "RipflowError",
    "SceneSpec",
    "Shoreline",
    "Skyline",
    "UndefinedGroundTruthError",
    "UnsupportedInputError",
    "VelocityField",
    "accumulate",
    "aggregate_offshore",
    "block_average",
    "build_colormap",
    "combined_mask",
    "compute_gradients",
    "detect_coastline",
    "detect_skyline",
    "dfd",
    "distance_matrix",
    "estimate_flow",
    "global_offshore",
    "ground_truth_flow",
    "hor_variant",
    "horn_schunck",
    "load_frame",
    "load_mask",
    "load_sequence",
    "local_offshore",
    "lucas_kanade",
    "mask_iou_f1",
    "offshore_field",
    "pr_curve",
    "precision_recall",
    "drifter_grid",
    "quiver_arrows",
    "render_drifters",
    "render_heatmap",
    "render_quiver",
    "render_sequence",
    "rip_region",
    "run_detection",
    "save_mask",
    "shore_mask",
    "simulate_drifters",
    "smooth_velocity",
    "threshold_region",
    "wave_mask",
    "scene_from_toml",
    "write_scene",
]
