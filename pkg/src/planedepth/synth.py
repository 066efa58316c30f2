"""Analytic planar-scene generator and sparse-point simulator.

Scenes are unions of planes (a rectangular room plus optional extra plane
primitives) rendered by exact ray-plane intersection, so depth, normals,
plane masks, and gravity are mutually consistent to machine precision.
The sparse simulator mimics tracked-feature depth: texture-clustered pixel
positions, Gaussian depth noise, and a fraction of scaled outliers.

World frame is Z-up; the room spans [0, ex] x [0, ey] x [0, ez].
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import (
    DEFAULT_MAX_DEPTH_M,
    CameraIntrinsics,
    SparseDepth,
    bearing_grid,
    rot_x,
    rot_z,
    round_half_up,
    valid_depth_mask,
)
from .errors import InvalidConfigError, UnknownLabelError
from .plane_refine import Plane

# Camera-to-world rotation of the canonical pose: upright camera at
# yaw=pitch=roll=0 looking along world +X (columns are the world images of
# the camera's right/down/forward axes).
_R0 = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])

_WORLD_DOWN = np.array([0.0, 0.0, -1.0])


@dataclass(frozen=True)
class CameraPose:
    """Camera position and orientation in the Z-up world frame.

    Yaw turns about world Z; pitch tilts the view up (toward world +Z);
    roll turns about the optical axis. All in degrees.
    """

    position: np.ndarray
    yaw_deg: float = 0.0
    pitch_deg: float = 0.0
    roll_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(
            self, "position", np.asarray(self.position, dtype=np.float64).reshape(3)
        )

    def rotation(self):
        """Camera-to-world rotation matrix."""
        return (
            rot_z(np.radians(self.yaw_deg))
            @ _R0
            @ rot_x(np.radians(self.pitch_deg))
            @ rot_z(np.radians(self.roll_deg))
        )


@dataclass(frozen=True)
class ScenePlane:
    """One-sided world plane n.p + d = 0, optionally clipped to an AABB."""

    n: np.ndarray
    d: float
    bounds: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise InvalidConfigError("scene plane normal must be nonzero")
        object.__setattr__(self, "n", n / norm)
        if self.bounds is not None:
            lo, hi = self.bounds
            lo = np.asarray(lo, dtype=np.float64).reshape(3)
            hi = np.asarray(hi, dtype=np.float64).reshape(3)
            if np.any(lo > hi):
                raise InvalidConfigError("plane bounds must satisfy lo <= hi")
            object.__setattr__(self, "bounds", (lo, hi))


@dataclass(frozen=True)
class SceneConfig:
    """Room extents, camera pose, intrinsics, and extra plane primitives."""

    room: np.ndarray
    pose: CameraPose
    K: CameraIntrinsics
    extra_planes: tuple = ()
    max_depth_m: float = DEFAULT_MAX_DEPTH_M

    def __post_init__(self):
        room = np.asarray(self.room, dtype=np.float64).reshape(3)
        object.__setattr__(self, "room", room)
        object.__setattr__(self, "extra_planes", tuple(self.extra_planes))
        if np.any(room <= 0):
            raise InvalidConfigError("room extents must be positive")
        if float(np.linalg.norm(room)) >= self.max_depth_m:
            raise InvalidConfigError(
                "room diagonal must stay below max_depth_m so all depths are valid"
            )
        p = self.pose.position
        if not (np.all(p > 0) and np.all(p < room)):
            raise InvalidConfigError("camera must be strictly inside the room")


@dataclass(frozen=True)
class RenderedScene:
    """Ground-truth render: depth, normals, instance masks, gravity.

    planes maps each mask label to its camera-frame Plane; floor_label is
    set when any floor pixel is visible.
    """

    depth: np.ndarray
    normals: np.ndarray
    masks: np.ndarray
    gravity: np.ndarray
    planes: dict
    floor_label: Optional[int] = None


def _room_faces(room):
    ex, ey, ez = room
    return [
        ScenePlane((0, 0, 1), 0.0, name="floor"),
        ScenePlane((0, 0, -1), ez, name="ceiling"),
        ScenePlane((1, 0, 0), 0.0, name="wall_x0"),
        ScenePlane((-1, 0, 0), ex, name="wall_x1"),
        ScenePlane((0, 1, 0), 0.0, name="wall_y0"),
        ScenePlane((0, -1, 0), ey, name="wall_y1"),
    ]


def render_scene(cfg):
    """Render a scene by exact ray-plane intersection.

    Every pixel's ray is intersected with all camera-facing planes; the
    nearest positive hit supplies depth (camera Z), the plane's camera-frame
    normal, and its instance label. Labels are compressed to a dense 1..K
    over the visible planes.
    """
    K = cfg.K
    R = cfg.pose.rotation()
    t = cfg.pose.position
    bearings = bearing_grid(K)
    dirs_w = bearings @ R.T  # world direction of each pixel ray

    planes = _room_faces(cfg.room) + list(cfg.extra_planes)
    depth = np.full(K.shape, np.inf)
    hit_index = np.full(K.shape, -1, dtype=np.int32)
    for i, plane in enumerate(planes):
        denom = dirs_w @ plane.n
        numer = -(float(plane.n @ t) + plane.d)
        facing = denom < -1e-12
        with np.errstate(divide="ignore", invalid="ignore"):
            s = numer / denom
        valid = facing & (s > 0)
        if plane.bounds is not None:
            lo, hi = plane.bounds
            p = t[None, None, :] + s[..., None] * dirs_w
            inside = np.all((p >= lo - 1e-9) & (p <= hi + 1e-9), axis=-1)
            valid &= inside
        closer = valid & (s < depth)
        depth[closer] = s[closer]
        hit_index[closer] = i

    if np.any(hit_index < 0) or np.any(depth >= cfg.max_depth_m):
        raise InvalidConfigError("scene leaves rays unresolved; check geometry")

    masks = np.zeros(K.shape, dtype=np.int32)
    normals = np.zeros(K.shape + (3,))
    out_planes = {}
    floor_label = None
    next_label = 1
    for i, plane in enumerate(planes):
        region = hit_index == i
        if not np.any(region):
            continue
        n_c = R.T @ plane.n
        d_c = float(plane.n @ t) + plane.d
        masks[region] = next_label
        normals[region] = n_c
        out_planes[next_label] = Plane(n_c, d_c)
        if plane.name == "floor":
            floor_label = next_label
        next_label += 1

    gravity = R.T @ _WORLD_DOWN
    return RenderedScene(
        depth=depth,
        normals=normals,
        masks=masks,
        gravity=gravity,
        planes=out_planes,
        floor_label=floor_label,
    )


@dataclass(frozen=True)
class SparseSimConfig:
    """Noise model for simulated tracked-feature depth."""

    point_count: int = 100
    cluster_bias: float = 0.0
    depth_noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    outlier_scale: float = 2.0
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.cluster_bias <= 1.0):
            raise InvalidConfigError("cluster_bias must lie in [0, 1]")
        if not (0.0 <= self.outlier_fraction <= 1.0):
            raise InvalidConfigError("outlier_fraction must lie in [0, 1]")
        if self.depth_noise_sigma < 0:
            raise InvalidConfigError("depth_noise_sigma must be non-negative")
        if self.outlier_scale < 1.0:
            raise InvalidConfigError("outlier_scale must be at least 1")
        if self.point_count < 0:
            raise InvalidConfigError("point_count must be non-negative")


def default_texture(width, height, seed=0):
    """Procedural texture: a few random-orientation sinusoids in [0, 1]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    tex = np.zeros((height, width))
    for _ in range(4):
        kx, ky = rng.uniform(-0.35, 0.35, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        tex += np.sin(kx * xs + ky * ys + phase)
    lo, hi = tex.min(), tex.max()
    return (tex - lo) / (hi - lo) if hi > lo else np.zeros_like(tex)


def simulate_sparse(gt_depth, cfg, texture=None):
    """Sample noisy sparse depths from a ground-truth depth image.

    Pixel positions are drawn without replacement with probability
    proportional to (1 - cluster_bias) + cluster_bias * g, where g is the
    texture's gradient magnitude normalized to [0, 1]. Depths get Gaussian
    noise of cfg.depth_noise_sigma; a cfg.outlier_fraction subset is
    replaced by the true depth scaled by Uniform(1, outlier_scale).

    When fewer pixels carry positive weight than requested, only those are
    returned. Noisy depths are floored at 1e-6 m to stay positive.
    """
    gt_depth = np.asarray(gt_depth, dtype=np.float64)
    rng = np.random.default_rng(cfg.rng_seed)
    if texture is None:
        texture = default_texture(gt_depth.shape[1], gt_depth.shape[0], cfg.rng_seed)
    texture = np.asarray(texture, dtype=np.float64)
    if texture.shape != gt_depth.shape:
        raise InvalidConfigError("texture must match the depth image dimensions")

    valid = valid_depth_mask(gt_depth)
    vs, us = np.nonzero(valid)
    if vs.size == 0 or cfg.point_count == 0:
        return SparseDepth.empty()

    gy, gx = np.gradient(texture)
    grad = np.hypot(gx, gy)[vs, us]
    peak = grad.max()
    if peak > 0:
        grad = grad / peak
    weights = (1.0 - cfg.cluster_bias) + cfg.cluster_bias * grad
    support = int(np.count_nonzero(weights > 0))
    take = min(cfg.point_count, support)
    if take == 0:
        return SparseDepth.empty()
    probs = weights / weights.sum()
    picks = rng.choice(vs.size, size=take, replace=False, p=probs)

    u, v = us[picks], vs[picks]
    true_z = gt_depth[v, u]
    z = true_z + cfg.depth_noise_sigma * rng.standard_normal(take)
    n_out = int(round(cfg.outlier_fraction * take))
    if n_out > 0:
        out_idx = rng.choice(take, size=n_out, replace=False)
        z[out_idx] = true_z[out_idx] * rng.uniform(1.0, cfg.outlier_scale, n_out)
    z = np.maximum(z, 1e-6)
    return SparseDepth(u, v, z)


def perturb_annotation(masks, label, shift=(0, 0), dilate=0, seed=0):
    """Shift and dilate one plane instance to emulate annotation misalignment.

    shift may be a (du, dv) pair or a scalar magnitude, in which case the
    direction is drawn from the seeded rng. Dilation applies `dilate`
    rounds of 8-neighborhood growth. Pixels the instance vacates become
    unlabeled; pixels it lands on are overwritten.
    """
    masks = np.asarray(masks)
    inst = masks == label
    if not np.any(inst):
        raise UnknownLabelError(f"label {label} not present in mask set")
    if np.isscalar(shift):
        rng = np.random.default_rng(seed)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        du = int(round_half_up(float(shift) * np.cos(angle)))
        dv = int(round_half_up(float(shift) * np.sin(angle)))
    else:
        du, dv = int(shift[0]), int(shift[1])

    h, w = masks.shape
    moved = np.zeros_like(inst)
    src_v = slice(max(0, -dv), min(h, h - dv))
    src_u = slice(max(0, -du), min(w, w - du))
    dst_v = slice(max(0, dv), min(h, h + dv))
    dst_u = slice(max(0, du), min(w, w + du))
    moved[dst_v, dst_u] = inst[src_v, src_u]
    if dilate > 0:
        moved = ndimage.binary_dilation(
            moved, structure=np.ones((3, 3), dtype=bool), iterations=int(dilate)
        )
    out = masks.copy()
    out[inst] = 0
    out[moved] = label
    return out
