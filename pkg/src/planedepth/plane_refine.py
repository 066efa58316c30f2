"""Refinement of imprecise plane-instance annotations.

A strict 3-point RANSAC fit over the annotated pixels yields a small but
accurate inlier set; region growing then expands it through neighboring
pixels that are both close to the plane and aligned with its normal. An
annotation whose grown region ends up substantially smaller than the
annotation itself is discarded.
"""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .core import backproject, valid_depth_mask, valid_normal_mask
from .errors import InsufficientPointsError, InvalidConfigError, UnknownLabelError

_DEGENERATE_CROSS_NORM = 1e-12
_MAX_RESAMPLE_ROUNDS = 16


@dataclass(frozen=True)
class Plane:
    """Plane n.p + d = 0 with unit n oriented toward the camera (d > 0)."""

    n: np.ndarray
    d: float

    def __post_init__(self):
        n = np.asarray(self.n, dtype=np.float64).reshape(3)
        norm = np.linalg.norm(n)
        if abs(norm - 1.0) > 1e-9:
            raise InvalidConfigError("plane normal must be unit length")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", float(self.d))

    def signed_distance(self, points):
        """n.p + d for one point or an (N, 3) array."""
        return np.asarray(points, dtype=np.float64) @ self.n + self.d

    def flipped(self):
        return Plane(-self.n, -self.d)


@dataclass(frozen=True)
class RefineConfig:
    """Thresholds for RANSAC fitting and region growing."""

    ransac_inlier_m: float = 0.02
    ransac_iters: int = 500
    grow_dist_m: float = 0.20
    grow_angle_deg: float = 30.0
    min_area_ratio: float = 0.5
    connectivity: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.ransac_inlier_m, self.grow_dist_m, self.grow_angle_deg) <= 0:
            raise InvalidConfigError("thresholds must be positive")
        if not 0 < self.min_area_ratio <= 1:
            raise InvalidConfigError("min_area_ratio must lie in (0, 1]")
        if self.ransac_iters < 1:
            raise InvalidConfigError("ransac_iters must be at least 1")
        if self.connectivity not in (4, 8):
            raise InvalidConfigError("connectivity must be 4 or 8")


@dataclass(frozen=True)
class RefineResult:
    """Outcome of refining one annotation: kept pixels or a discard reason."""

    kept: bool
    pixels: Optional[np.ndarray] = None
    plane: Optional[Plane] = None
    inliers: Optional[np.ndarray] = None
    reason: Optional[str] = None


def _mask_points(mask, depth, K):
    """Backprojected 3D points of mask pixels with valid depth."""
    usable = np.asarray(mask, dtype=bool) & valid_depth_mask(depth)
    vs, us = np.nonzero(usable)
    b = backproject(us, vs, K)
    return b * depth[vs, us][:, None], vs, us


def _fit_plane_lsq(points):
    """Least-squares plane through points: centroid + smallest scatter axis."""
    centroid = points.mean(axis=0)
    q = points - centroid
    _, _, vt = np.linalg.svd(q, full_matrices=False)
    n = vt[-1]
    d = -float(n @ centroid)
    if n @ centroid > 0:  # orient toward the camera
        n, d = -n, -d
    return Plane(n / np.linalg.norm(n), d)


def fit_plane_ransac(mask, depth, K, cfg, rng=None):
    """3-point RANSAC plane fit over the masked pixels of a depth image.

    Each iteration samples 3 distinct valid pixels, fits the exact plane
    through them (collinear triples are redrawn), and counts mask points
    within cfg.ransac_inlier_m of it. The winning inlier set is refit by
    least squares and the normal flipped to face the camera.

    Returns (Plane, inlier_mask) where inlier_mask marks the winning
    inliers in image coordinates.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    points, vs, us = _mask_points(mask, depth, K)
    n_pts = points.shape[0]
    if n_pts < 3:
        raise InsufficientPointsError(f"{n_pts} valid points, need at least 3")

    triples = rng.integers(0, n_pts, size=(cfg.ransac_iters, 3))
    normals = np.empty((cfg.ransac_iters, 3))
    offsets = np.empty(cfg.ransac_iters)
    pending = np.ones(cfg.ransac_iters, dtype=bool)
    for _ in range(_MAX_RESAMPLE_ROUNDS):
        idx = triples[pending]
        distinct = (
            (idx[:, 0] != idx[:, 1])
            & (idx[:, 0] != idx[:, 2])
            & (idx[:, 1] != idx[:, 2])
        )
        p0, p1, p2 = points[idx[:, 0]], points[idx[:, 1]], points[idx[:, 2]]
        cross = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(cross, axis=1)
        ok = distinct & (norm > _DEGENERATE_CROSS_NORM)
        rows = np.nonzero(pending)[0]
        good = rows[ok]
        normals[good] = cross[ok] / norm[ok, None]
        offsets[good] = -np.einsum("ij,ij->i", normals[good], points[idx[ok, 0]])
        pending[good] = False
        if not pending.any():
            break
        triples[pending] = rng.integers(0, n_pts, size=(int(pending.sum()), 3))
    if pending.any():
        raise InsufficientPointsError(
            "could not sample a non-collinear point triple; geometry is degenerate"
        )

    best_count = -1
    best_iter = 0
    # Hypotheses are scored in float32 (plenty for picking the best count);
    # the winning inlier set below is recomputed in float64. Counting uses
    # per-column bounds on P.n so no (n_pts x iters) float temporary is
    # materialized.
    points32 = points.astype(np.float32)
    chunk = max(1, min(cfg.ransac_iters, 64_000_000 // (4 * max(n_pts, 1))))
    for start in range(0, cfg.ransac_iters, chunk):
        nn = normals[start : start + chunk].astype(np.float32)
        dd = offsets[start : start + chunk].astype(np.float32)
        dots = points32 @ nn.T
        lo = -dd - np.float32(cfg.ransac_inlier_m)
        hi = -dd + np.float32(cfg.ransac_inlier_m)
        counts = np.count_nonzero((dots > lo) & (dots < hi), axis=0)
        i = int(np.argmax(counts))
        if counts[i] > best_count:
            best_count = int(counts[i])
            best_iter = start + i

    plane0 = Plane(normals[best_iter], float(offsets[best_iter]))
    inlier = np.abs(plane0.signed_distance(points)) < cfg.ransac_inlier_m
    plane = _fit_plane_lsq(points[inlier])
    inlier_mask = np.zeros(depth.shape, dtype=bool)
    inlier_mask[vs[inlier], us[inlier]] = True
    return plane, inlier_mask


def _admissible(plane, depth, normals, K, cfg):
    """Pixels passing both growth criteria: close to the plane, aligned normal."""
    ok_depth = valid_depth_mask(depth)
    vs, us = np.nonzero(ok_depth)
    pts = backproject(us, vs, K) * depth[vs, us][:, None]
    near = np.zeros(depth.shape, dtype=bool)
    near[vs, us] = np.abs(plane.signed_distance(pts)) < cfg.grow_dist_m
    ok_norm = valid_normal_mask(normals)
    cos_thresh = np.cos(np.radians(cfg.grow_angle_deg))
    aligned = ok_norm & (np.asarray(normals) @ plane.n > cos_thresh)
    return near & aligned


def region_grow(seeds, plane, depth, normals, K, cfg):
    """Grow the coplanar region from seed pixels.

    A pixel joins iff its backprojected point lies within cfg.grow_dist_m of
    the plane and its normal is within cfg.grow_angle_deg of the plane
    normal; seeds get no exemption. Growth spreads through 4- or
    8-connected admissible pixels, so the result is the union of the
    admissible connected components containing seeds.
    """
    seeds = np.asarray(seeds, dtype=bool)
    admissible = _admissible(plane, depth, normals, K, cfg)
    structure = (
        ndimage.generate_binary_structure(2, 1)
        if cfg.connectivity == 4
        else ndimage.generate_binary_structure(2, 2)
    )
    components, _ = ndimage.label(admissible, structure=structure)
    seed_labels = np.unique(components[seeds & admissible])
    seed_labels = seed_labels[seed_labels > 0]
    return np.isin(components, seed_labels)


def refine_annotation(label, masks, depth, normals, K, cfg):
    """Refine one annotated plane instance: RANSAC fit, then region growing.

    Growth starts from the RANSAC inliers and may leave the annotation.
    Returns a discard when fewer than 3 valid points support the fit or the
    grown region covers less than cfg.min_area_ratio of the annotated area.
    The RANSAC seed is derived as cfg.rng_seed XOR label so instances can be
    refined independently.
    """
    masks = np.asarray(masks)
    ann = masks == label
    area = int(np.count_nonzero(ann))
    if area == 0:
        raise UnknownLabelError(f"label {label} not present in mask set")
    rng = np.random.default_rng(cfg.rng_seed ^ int(label))
    try:
        plane, inliers = fit_plane_ransac(ann, depth, K, cfg, rng=rng)
    except InsufficientPointsError as exc:
        return RefineResult(kept=False, reason=f"insufficient points: {exc}")
    grown = region_grow(inliers, plane, depth, normals, K, cfg)
    grown_area = int(np.count_nonzero(grown))
    if grown_area < cfg.min_area_ratio * area:
        return RefineResult(
            kept=False,
            plane=plane,
            inliers=inliers,
            reason=f"grown area {grown_area} below "
            f"{cfg.min_area_ratio:.0%} of annotated {area}",
        )
    return RefineResult(kept=True, pixels=grown, plane=plane, inliers=inliers)


def refine_all(masks, depth, normals, K, cfg):
    """Refine every instance in a mask set and relabel the survivors 1..K.

    Returns (refined_masks, planes, dropped) where planes maps each new
    label to its fitted Plane and dropped lists (old_label, reason) pairs.
    Where grown regions overlap, the pixel goes to the plane it lies
    closest to.
    """
    masks = np.asarray(masks)
    labels = np.unique(masks)
    labels = labels[labels > 0]
    refined = np.zeros(masks.shape, dtype=np.int32)
    best_dist = np.full(masks.shape, np.inf)
    planes = {}
    dropped = []
    next_label = 1
    for label in labels:
        result = refine_annotation(int(label), masks, depth, normals, K, cfg)
        if not result.kept:
            dropped.append((int(label), result.reason))
            continue
        vs, us = np.nonzero(result.pixels)
        pts = backproject(us, vs, K) * depth[vs, us][:, None]
        dist = np.abs(result.plane.signed_distance(pts))
        closer = dist < best_dist[vs, us]
        refined[vs[closer], us[closer]] = next_label
        best_dist[vs[closer], us[closer]] = dist[closer]
        planes[next_label] = result.plane
        next_label += 1
    # Overlap resolution can empty an instance; compress to a dense 1..K.
    present = np.unique(refined[refined > 0])
    remap = {int(old): new for new, old in enumerate(present, start=1)}
    out = np.zeros_like(refined)
    for old, new in remap.items():
        out[refined == old] = new
    planes = {remap[k]: p for k, p in planes.items() if k in remap}
    return out, planes, dropped


def with_seed(cfg, seed):
    """Copy of a RefineConfig with a different rng_seed."""
    return replace(cfg, rng_seed=int(seed))
