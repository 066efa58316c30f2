"""Gravity-based roll alignment.

Estimates the in-image roll of the gravity direction and builds a pixel
homography H = K * Rz(theta) * K^-1 that rotates the image about the optical
axis until gravity projects onto the image's down axis (+Y). Roll warps
preserve per-point depth, so sparse depth survives the warp unchanged.
"""

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, SparseDepth, round_half_up, rot_z, valid_normal_mask
from .errors import DegenerateGravityError, InsufficientFloorError

# Below this in-plane gravity norm (about 2.9 deg off the optical axis) the
# roll angle is numerically meaningless.
MIN_IN_PLANE_NORM = 0.05

DEFAULT_MIN_FLOOR_PIXELS = 50


def gravity_from_floor(normals, floor_mask, min_pixels=DEFAULT_MIN_FLOOR_PIXELS):
    """Estimate gravity as the negated mean of floor-pixel normals.

    Floor normals point up toward the camera; gravity points down, so the
    renormalized mean is negated. Requires at least min_pixels valid
    floor-labeled normals.
    """
    normals = np.asarray(normals, dtype=np.float64)
    floor_mask = np.asarray(floor_mask, dtype=bool)
    valid = floor_mask & valid_normal_mask(normals)
    n = int(np.count_nonzero(valid))
    if n < min_pixels:
        raise InsufficientFloorError(
            f"{n} valid floor normals, need at least {min_pixels}"
        )
    mean = normals[valid].mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-12:
        raise InsufficientFloorError("floor normals cancel out; no mean direction")
    return -mean / norm


def roll_angle(g):
    """Roll angle theta = atan2(gx, gy) of a gravity vector.

    Rotating the camera frame by Rz(theta) sends gravity to a vector with
    zero X component and positive Y component (image down). Raises
    DegenerateGravityError when gravity is too close to the optical axis.
    """
    g = np.asarray(g, dtype=np.float64)
    in_plane = float(np.hypot(g[0], g[1]))
    if in_plane < MIN_IN_PLANE_NORM * np.linalg.norm(g):
        raise DegenerateGravityError(
            "gravity is nearly parallel to the optical axis; roll is undefined"
        )
    return float(np.arctan2(g[0], g[1]))


def _pixel_homography(K, angle):
    """H = K * Rz(angle) * K^-1 mapping pixels across a roll of the frame."""
    if angle == 0.0:
        return np.eye(3)
    return K.matrix() @ rot_z(angle) @ K.inverse_matrix()


@dataclass(frozen=True)
class RollWarp:
    """Pixel maps for a roll of the camera frame by `angle`.

    forward sends a warped-image pixel to its source pixel
    (K * Rz(angle)^T * K^-1); inverse sends a source pixel to its warped
    position. forward @ inverse is the identity to machine precision.
    """

    angle: float
    K: CameraIntrinsics
    forward: np.ndarray
    inverse: np.ndarray


def build_roll_warp(g, K):
    """Warp aligning the projected gravity g with the image down axis."""
    theta = roll_angle(g)
    return RollWarp(
        angle=theta,
        K=K,
        forward=_pixel_homography(K, -theta),
        inverse=_pixel_homography(K, theta),
    )


def apply_homography(H, u, v):
    """Map pixel coordinates through a 3x3 homography."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    x = H[0, 0] * u + H[0, 1] * v + H[0, 2]
    y = H[1, 0] * u + H[1, 1] * v + H[1, 2]
    w = H[2, 0] * u + H[2, 1] * v + H[2, 2]
    return x / w, y / w


def _source_coords(w, shape):
    h_img, w_img = shape
    us, vs = np.meshgrid(np.arange(w_img), np.arange(h_img))
    return apply_homography(w.forward, us, vs)


def _sample_nearest(img, x, y, fill):
    h, w = img.shape[:2]
    xi = round_half_up(x)
    yi = round_half_up(y)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.full(x.shape + img.shape[2:], fill, dtype=img.dtype)
    out[inside] = img[yi[inside], xi[inside]]
    return out


def _sample_bilinear(img, x, y):
    """Bilinear sample a float image; out-of-frame samples become NaN.

    A sample whose 2x2 neighborhood touches a NaN pixel comes out NaN, so
    invalid regions never bleed fabricated values.
    """
    h, w = img.shape[:2]
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(y).astype(np.int64), 0, h - 2)
    wx = x - x0
    wy = y - y0
    if img.ndim == 3:
        wx = wx[..., None]
        wy = wy[..., None]
    v00 = img[y0, x0]
    v01 = img[y0, x0 + 1]
    v10 = img[y0 + 1, x0]
    v11 = img[y0 + 1, x0 + 1]
    top = v00 * (1.0 - wx) + v01 * wx
    bot = v10 * (1.0 - wx) + v11 * wx
    out = top * (1.0 - wy) + bot * wy
    out[~inside] = np.nan
    return out


def warp_image(img, w, interpolation="bilinear"):
    """Resample an image into the roll-aligned frame.

    Scalar or 3-channel float images. Bilinear for continuous data, nearest
    for anything label-like; samples falling outside the source are NaN.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError("image must be at least 2x2 to warp")
    x, y = _source_coords(w, img.shape[:2])
    if interpolation == "bilinear":
        return _sample_bilinear(img, x, y)
    if interpolation == "nearest":
        return _sample_nearest(img, x, y, fill=np.nan)
    raise ValueError(f"unknown interpolation {interpolation!r}")


def warp_labels(labels, w):
    """Resample an integer label image (nearest neighbor, 0 outside)."""
    labels = np.asarray(labels)
    x, y = _source_coords(w, labels.shape[:2])
    return _sample_nearest(labels, x, y, fill=0)


def warp_normals(nm, w):
    """Resample a normal map and rotate the vectors into the rolled frame.

    Vectors are bilinearly interpolated and renormalized; a pixel whose
    source neighborhood touches an invalid normal (or falls off frame)
    becomes invalid. Each surviving vector is rotated by Rz(angle) so it is
    expressed in the warped camera frame.
    """
    nm = np.asarray(nm, dtype=np.float64)
    x, y = _source_coords(w, nm.shape[:2])
    sampled = _sample_bilinear(nm, x, y)
    validity = _sample_bilinear(
        valid_normal_mask(nm).astype(np.float64), x, y
    )
    norms = np.linalg.norm(sampled, axis=-1)
    good = np.isfinite(validity) & (validity > 1.0 - 1e-9) & (norms > 1e-6)
    out = np.zeros_like(nm)
    rotated = sampled[good] @ rot_z(w.angle).T
    out[good] = rotated / np.linalg.norm(rotated, axis=-1, keepdims=True)
    return out


def warp_sparse_depth(sd, w):
    """Move sparse entries to their warped pixel positions.

    Depth values are unchanged (a roll preserves Z). Entries mapped off
    frame are dropped; collisions keep the smaller depth.
    """
    if len(sd) == 0:
        return sd
    x, y = apply_homography(w.inverse, sd.u, sd.v)
    u = round_half_up(x)
    v = round_half_up(y)
    inside = (u >= 0) & (u < w.K.width) & (v >= 0) & (v < w.K.height)
    u, v, z = u[inside], v[inside], sd.z[inside]
    if u.size == 0:
        return SparseDepth.empty()
    order = np.lexsort((z, u, v))
    u, v, z = u[order], v[order], z[order]
    keep = np.ones(u.size, dtype=bool)
    keep[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    return SparseDepth(u[keep], v[keep], z[keep])


def invert_roll_warp(w):
    """The warp undoing w: a roll by -angle with the pixel maps swapped."""
    return RollWarp(angle=-w.angle, K=w.K, forward=w.inverse, inverse=w.forward)


def align_gravity(g, theta):
    """Gravity vector after rolling the camera frame by theta."""
    return rot_z(theta) @ np.asarray(g, dtype=np.float64)


__all__ = [
    "MIN_IN_PLANE_NORM",
    "RollWarp",
    "align_gravity",
    "apply_homography",
    "build_roll_warp",
    "gravity_from_floor",
    "invert_roll_warp",
    "roll_angle",
    "warp_image",
    "warp_labels",
    "warp_normals",
    "warp_sparse_depth",
]
