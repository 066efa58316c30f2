"""Depth and surface-normal evaluation metrics.

Depth: RMSE in meters plus the delta accuracy E(pred, delta), the percentage
of pixels with max(pred/gt, gt/pred) strictly below delta. Normals: mean,
median, and RMSE of the per-pixel angular error in degrees plus the
percentage of pixels strictly below each angular threshold.

All metrics are computed over pixels valid on both sides (finite and
positive depth; unit normal), intersected with an optional mask.
"""

from dataclasses import dataclass

import numpy as np

from .core import valid_depth_mask, valid_normal_mask
from .errors import DimensionMismatchError, EmptyOverlapError

DELTA_THRESHOLDS = (1.05, 1.10, 1.25, 1.25**2, 1.25**3)
ANGLE_THRESHOLDS_DEG = (11.25, 22.5, 30.0)

_DELTA_KEYS = {
    1.05: "delta_1_05",
    1.10: "delta_1_10",
    1.25: "delta_1_25",
    1.25**2: "delta_1_25_2",
    1.25**3: "delta_1_25_3",
}
_ANGLE_KEYS = {11.25: "below_11_25", 22.5: "below_22_5", 30.0: "below_30_0"}


@dataclass(frozen=True)
class DepthMetrics:
    rmse: float
    delta: dict
    n_pixels: int

    def as_dict(self):
        out = {"rmse": self.rmse}
        out.update({_DELTA_KEYS[t]: self.delta[t] for t in DELTA_THRESHOLDS})
        out["n_pixels"] = self.n_pixels
        return out


@dataclass(frozen=True)
class NormalMetrics:
    mad: float
    median: float
    rmse: float
    below: dict
    n_pixels: int

    def as_dict(self):
        out = {"mad": self.mad, "median": self.median, "rmse": self.rmse}
        out.update({_ANGLE_KEYS[t]: self.below[t] for t in ANGLE_THRESHOLDS_DEG})
        out["n_pixels"] = self.n_pixels
        return out


def _check_shapes(pred, gt, valid_mask):
    if pred.shape[:2] != gt.shape[:2]:
        raise DimensionMismatchError(
            f"prediction {pred.shape[:2]} vs ground truth {gt.shape[:2]}"
        )
    if valid_mask is not None and np.asarray(valid_mask).shape != pred.shape[:2]:
        raise DimensionMismatchError("mask does not match image dimensions")


def depth_metrics_from_samples(pred, gt):
    """Metrics over paired per-pixel depth samples (both already valid)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    n = pred.size
    if n == 0:
        raise EmptyOverlapError("no pixel is valid in both depth images")
    rmse = float(np.sqrt(np.mean((pred - gt) ** 2)))
    ratio = np.maximum(pred / gt, gt / pred)
    delta = {
        t: 100.0 * float(np.count_nonzero(ratio < t)) / n for t in DELTA_THRESHOLDS
    }
    return DepthMetrics(rmse=rmse, delta=delta, n_pixels=int(n))


def normal_metrics_from_errors(err_deg):
    """Metrics over per-pixel angular errors in degrees."""
    err_deg = np.asarray(err_deg, dtype=np.float64)
    n = err_deg.size
    if n == 0:
        raise EmptyOverlapError("no pixel is valid in both normal maps")
    below = {
        t: 100.0 * float(np.count_nonzero(err_deg < t)) / n
        for t in ANGLE_THRESHOLDS_DEG
    }
    return NormalMetrics(
        mad=float(np.mean(err_deg)),
        median=float(np.median(err_deg)),
        rmse=float(np.sqrt(np.mean(err_deg**2))),
        below=below,
        n_pixels=int(n),
    )


def depth_error_samples(pred, gt, valid_mask=None):
    """Paired (pred, gt) depth vectors over the jointly valid pixels."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_shapes(pred, gt, valid_mask)
    joint = valid_depth_mask(pred) & valid_depth_mask(gt)
    if valid_mask is not None:
        joint &= np.asarray(valid_mask, dtype=bool)
    return pred[joint], gt[joint]


def eval_depth(pred, gt, valid_mask=None):
    """Evaluate a dense depth prediction against ground truth."""
    p, g = depth_error_samples(pred, gt, valid_mask)
    return depth_metrics_from_samples(p, g)


def normal_error_degrees(pred, gt, valid_mask=None):
    """Per-pixel angular errors (degrees) over the jointly valid pixels."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    _check_shapes(pred, gt, valid_mask)
    joint = valid_normal_mask(pred) & valid_normal_mask(gt)
    if valid_mask is not None:
        joint &= np.asarray(valid_mask, dtype=bool)
    dots = np.einsum("ij,ij->i", pred[joint].reshape(-1, 3), gt[joint].reshape(-1, 3))
    return np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))


def eval_normals(pred, gt, valid_mask=None):
    """Evaluate a normal-map prediction against ground truth."""
    return normal_metrics_from_errors(normal_error_degrees(pred, gt, valid_mask))


def eval_sparse(pred, gt):
    """Evaluate sparse depth entries against a dense ground truth."""
    gt = np.asarray(gt, dtype=np.float64)
    if len(pred) and (pred.u.max() >= gt.shape[1] or pred.v.max() >= gt.shape[0]):
        raise DimensionMismatchError("sparse entries fall outside the ground truth")
    g = gt[pred.v, pred.u] if len(pred) else np.empty(0)
    ok = valid_depth_mask(g)
    return depth_metrics_from_samples(pred.z[ok], g[ok])
