"""Geometric sparse-depth toolkit.

Pinhole projection and backprojection, gravity-based roll alignment,
RANSAC plane-annotation refinement, plane-based sparse depth enrichment,
RGB-D evaluation metrics, and an analytic planar-scene generator that
serves as the ground-truth oracle for all of it.
"""

from .core import (
    CameraIntrinsics,
    SparseDepth,
    backproject,
    bearing_grid,
    depth_to_points,
    project_points,
    sparse_points,
    sparse_to_image,
    valid_depth_mask,
    valid_normal_mask,
)
from .enrich import (
    EnrichConfig,
    compute_incomplete_depth,
    enrich_sparse_depth,
    estimate_plane_distance,
    estimate_plane_normal,
    estimate_planes,
    sample_enriched,
)
from .errors import (
    DegenerateGravityError,
    DimensionMismatchError,
    DuplicatePixelError,
    EmptyOverlapError,
    InsufficientFloorError,
    InsufficientPointsError,
    InvalidConfigError,
    NoSupportError,
    NoValidNormalsError,
    OutOfBoundsError,
    ParseError,
    PlaneDepthError,
    UnknownLabelError,
)
from .gravity import (
    RollWarp,
    build_roll_warp,
    gravity_from_floor,
    roll_angle,
    warp_image,
    warp_labels,
    warp_normals,
    warp_sparse_depth,
)
from .metrics import (
    DepthMetrics,
    NormalMetrics,
    eval_depth,
    eval_normals,
    eval_sparse,
)
from .pipeline import FrameBundle, PipelineConfig, load_frame, run_dataset, run_frame
from .plane_refine import (
    Plane,
    RefineConfig,
    RefineResult,
    fit_plane_ransac,
    refine_all,
    refine_annotation,
    region_grow,
)
from .synth import (
    CameraPose,
    RenderedScene,
    SceneConfig,
    ScenePlane,
    SparseSimConfig,
    perturb_annotation,
    render_scene,
    simulate_sparse,
)

__version__ = "0.1.0"
