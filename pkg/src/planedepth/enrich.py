"""Plane-based sparse depth enrichment.

Per detected plane, the normal is estimated by consensus voting over the
mask's per-pixel normals and the distance by consensus over the sparse 3D
points projecting into the mask (each point p gives the hypothesis
d = -n.p). The plane then assigns a depth z = -d / (n.b) to every mask
pixel, forming the incomplete depth image, from which a random subset is
drawn to enrich the original sparse depth.
"""

from dataclasses import dataclass, replace

import numpy as np

from .core import SparseDepth, bearing_grid, sparse_points, valid_normal_mask
from .errors import InvalidConfigError, NoSupportError, NoValidNormalsError
from .plane_refine import Plane

# A ray is treated as parallel to the plane when n.b is above this.
_PARALLEL_EPS = -1e-6


@dataclass(frozen=True)
class EnrichConfig:
    """Consensus thresholds and sampling budget for enrichment."""

    normal_hypotheses: int = 16
    normal_inlier_deg: float = 10.0
    dist_inlier_m: float = 0.05
    min_dist_support: int = 1
    sample_count: int = 100
    max_depth_m: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.normal_hypotheses < 1:
            raise InvalidConfigError("normal_hypotheses must be at least 1")
        if min(self.normal_inlier_deg, self.dist_inlier_m, self.max_depth_m) <= 0:
            raise InvalidConfigError("thresholds must be positive")
        if self.sample_count < 0 or self.min_dist_support < 1:
            raise InvalidConfigError("counts must be non-negative")


def estimate_plane_normal(mask, normals, cfg, rng=None):
    """Consensus plane normal from the per-pixel normals inside a mask.

    Draws cfg.normal_hypotheses mask pixels (uniformly, with replacement),
    scores each hypothesis by how many mask normals lie within
    cfg.normal_inlier_deg of it, and returns the renormalized mean of the
    largest set. Ties go to the first-drawn hypothesis.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    normals = np.asarray(normals, dtype=np.float64)
    valid = np.asarray(mask, dtype=bool) & valid_normal_mask(normals)
    candidates = normals[valid]
    if candidates.shape[0] == 0:
        raise NoValidNormalsError("no valid normals inside the plane mask")
    picks = rng.integers(0, candidates.shape[0], size=cfg.normal_hypotheses)
    hypotheses = candidates[picks]
    cos_thresh = np.cos(np.radians(cfg.normal_inlier_deg))
    agree = candidates @ hypotheses.T > cos_thresh  # (n_candidates, n_hyp)
    counts = agree.sum(axis=0)
    best = int(np.argmax(counts))  # argmax keeps the first-drawn winner on ties
    mean = candidates[agree[:, best]].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise NoValidNormalsError("winning normal set cancels out")
    return mean / norm


def estimate_plane_distance(n, points, cfg):
    """Consensus plane distance from 3D points assumed to lie on the plane.

    Every point p contributes the hypothesis d = -n.p; a hypothesis's
    inliers are the points within cfg.dist_inlier_m of it and the result is
    the mean over the largest inlier set (ties to the smallest index).
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        raise NoSupportError("no 3D points support this plane")
    n = np.asarray(n, dtype=np.float64)
    d = -(points @ n)
    close = np.abs(d[None, :] - d[:, None]) < cfg.dist_inlier_m
    counts = close.sum(axis=1)
    best = int(np.argmax(counts))
    if counts[best] < cfg.min_dist_support:
        raise NoSupportError(
            f"largest consensus set has {counts[best]} points, "
            f"need {cfg.min_dist_support}"
        )
    return float(d[close[best]].mean())


def plane_depth(plane, K, max_depth_m=None):
    """Dense depth z = -d / (n.b) the plane would produce at every pixel.

    Pixels whose ray is parallel to the plane or faces away from it, or
    whose depth falls outside (0, max_depth_m), are NaN.
    """
    b = bearing_grid(K)
    denom = b @ plane.n
    with np.errstate(divide="ignore", invalid="ignore"):
        z = -plane.d / denom
    z[denom >= _PARALLEL_EPS] = np.nan
    z[~(z > 0)] = np.nan
    if max_depth_m is not None:
        z[z >= max_depth_m] = np.nan
    return z


def compute_incomplete_depth(planes, K, cfg):
    """Depth image synthesized from (mask, Plane) pairs.

    Each plane fills its mask pixels with z = -d / (n.b); pixels with a
    parallel or away-facing ray, or a depth outside (0, max_depth_m), stay
    invalid. Overlapping masks resolve to the smaller depth.
    """
    out = np.full(K.shape, np.nan)
    for mask, plane in planes:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != K.shape:
            raise InvalidConfigError("plane mask does not match camera dimensions")
        z = plane_depth(plane, K, cfg.max_depth_m)
        z[~mask] = np.nan
        out = np.fmin(out, z)
    return out


def sample_enriched(sparse, incomplete, cfg, rng=None):
    """Enrich a sparse depth set with samples from the incomplete depth.

    Draws min(cfg.sample_count, available) pixels uniformly at random
    without replacement from the valid incomplete-depth pixels not already
    present in the sparse set, and unions them with it.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    incomplete = np.asarray(incomplete, dtype=np.float64)
    available = np.isfinite(incomplete)
    if len(sparse):
        available[sparse.v, sparse.u] = False
    vs, us = np.nonzero(available)
    take = min(cfg.sample_count, vs.size)
    if take == 0:
        return sparse
    picks = rng.choice(vs.size, size=take, replace=False)
    u = np.concatenate([sparse.u, us[picks]])
    v = np.concatenate([sparse.v, vs[picks]])
    z = np.concatenate([sparse.z, incomplete[vs[picks], us[picks]]])
    return SparseDepth(u, v, z)


def estimate_planes(masks, normals, sparse, K, cfg, overrides=None):
    """Estimate (mask, Plane) pairs for every instance in a label image.

    The normal comes from consensus voting over the instance's normals and
    the distance from the sparse points whose pixels fall inside the
    instance. Instances without valid normals or supporting points are
    skipped. `overrides` may map labels to already-known planes (e.g. from
    annotation refinement), bypassing estimation for those instances.
    Voting draws are seeded per label as cfg.rng_seed XOR label.
    """
    masks = np.asarray(masks)
    labels = np.unique(masks)
    labels = labels[labels > 0]
    sparse_pts = sparse_points(sparse, K) if len(sparse) else None
    result = []
    skipped = []
    for label in labels:
        mask = masks == label
        if overrides is not None and int(label) in overrides:
            result.append((mask, overrides[int(label)]))
            continue
        rng = np.random.default_rng(cfg.rng_seed ^ int(label))
        try:
            n = estimate_plane_normal(mask, normals, cfg, rng=rng)
            if sparse_pts is None:
                raise NoSupportError("no sparse points available")
            in_mask = mask[sparse.v, sparse.u]
            d = estimate_plane_distance(n, sparse_pts[in_mask], cfg)
            result.append((mask, Plane(n, d)))
        except (NoValidNormalsError, NoSupportError) as exc:
            skipped.append((int(label), str(exc)))
    return result, skipped


def enrich_sparse_depth(sparse, masks, normals, K, cfg, overrides=None):
    """Full enrichment step: estimate planes, synthesize depth, sample.

    Returns (enriched, incomplete, planes, skipped) where planes holds the
    (mask, Plane) pairs actually used.
    """
    planes, skipped = estimate_planes(masks, normals, sparse, K, cfg, overrides)
    incomplete = compute_incomplete_depth(planes, K, cfg)
    enriched = sample_enriched(sparse, incomplete, cfg)
    return enriched, incomplete, planes, skipped


def with_seed(cfg, seed):
    """Copy of an EnrichConfig with a different rng_seed."""
    return replace(cfg, rng_seed=int(seed))
