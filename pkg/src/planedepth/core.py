"""Camera model, image containers, and point-cloud projection.

Conventions used throughout the package:

- Camera frame: X right, Y down, Z forward (optical axis). For an upright
  camera, gravity is approximately (0, 1, 0).
- Dense depth images are 2D float arrays in meters; invalid pixels hold NaN,
  never 0, so a missing depth can never be mistaken for a real one.
- Normal maps are (H, W, 3) float arrays of unit vectors in the camera frame;
  invalid pixels are exactly (0, 0, 0).
- Pixel rounding is nearest integer with ties toward +inf: floor(x + 0.5).
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DuplicatePixelError,
    InvalidConfigError,
    OutOfBoundsError,
)

DEFAULT_MAX_DEPTH_M = 20.0


def rot_x(angle):
    """Rotation matrix about the X axis (right-handed, radians)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    """Rotation matrix about the Y axis (right-handed, radians)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    """Rotation matrix about the Z axis (right-handed, radians)."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def unit(v):
    """Normalize a vector to unit length."""
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def round_half_up(x):
    """Round to nearest integer, ties toward +inf."""
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidConfigError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidConfigError("principal point must lie inside the image")
        if self.width < 1 or self.height < 1:
            raise InvalidConfigError("image dimensions must be positive")

    @property
    def shape(self):
        """(height, width) array shape of images from this camera."""
        return (self.height, self.width)

    def matrix(self):
        """3x3 intrinsic matrix K."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self):
        """Analytic inverse of K (exact, no linear solve)."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    def contains(self, u, v):
        """Whether pixel coordinates fall within the image bounds."""
        u = np.asarray(u)
        v = np.asarray(v)
        return (u >= 0) & (u < self.width) & (v >= 0) & (v < self.height)


@dataclass(frozen=True)
class SparseDepth:
    """Pixel-indexed sparse depths: parallel arrays (u, v, z).

    Entries are kept sorted by (v, u) so that equal sets compare equal and
    serialization is canonical. At most one entry per pixel; all depths > 0.
    """

    u: np.ndarray
    v: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.int64)
        v = np.asarray(self.v, dtype=np.int64)
        z = np.asarray(self.z, dtype=np.float64)
        if not (u.shape == v.shape == z.shape) or u.ndim != 1:
            raise InvalidConfigError("u, v, z must be 1D arrays of equal length")
        if np.any(u < 0) or np.any(v < 0):
            raise OutOfBoundsError("sparse depth entries must have non-negative pixels")
        if z.size and (not np.all(np.isfinite(z)) or np.any(z <= 0)):
            raise InvalidConfigError("sparse depths must be finite and positive")
        order = np.lexsort((u, v))
        u, v, z = u[order], v[order], z[order]
        if u.size > 1:
            same = (u[1:] == u[:-1]) & (v[1:] == v[:-1])
            if np.any(same):
                i = int(np.argmax(same))
                raise DuplicatePixelError(
                    f"duplicate sparse entry at pixel ({u[i]}, {v[i]})"
                )
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "z", z)

    @classmethod
    def empty(cls):
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0))

    @classmethod
    def from_entries(cls, entries):
        """Build from an iterable of (u, v, z) triples."""
        entries = list(entries)
        if not entries:
            return cls.empty()
        arr = np.asarray(entries, dtype=np.float64).reshape(len(entries), 3)
        return cls(arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64), arr[:, 2])

    def entries(self):
        """List of (u, v, z) tuples in canonical order."""
        return [
            (int(u), int(v), float(z)) for u, v, z in zip(self.u, self.v, self.z)
        ]

    def __len__(self):
        return int(self.u.size)

    def __eq__(self, other):
        if not isinstance(other, SparseDepth):
            return NotImplemented
        return (
            np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
            and np.array_equal(self.z, other.z)
        )


def valid_depth_mask(depth):
    """Pixels holding a usable depth: finite and strictly positive."""
    depth = np.asarray(depth)
    return np.isfinite(depth) & (depth > 0)


def valid_normal_mask(normals, tol=1e-6):
    """Pixels holding a usable normal: norm within tol of 1 (invalid is 0)."""
    norms = np.linalg.norm(np.asarray(normals), axis=-1)
    return np.abs(norms - 1.0) <= tol


def check_depth_image(depth, max_depth=DEFAULT_MAX_DEPTH_M):
    """Raise if any valid depth falls outside (0, max_depth)."""
    depth = np.asarray(depth)
    finite = np.isfinite(depth)
    if np.any(depth[finite] <= 0) or np.any(depth[finite] >= max_depth):
        raise InvalidConfigError(
            f"valid depths must lie strictly inside (0, {max_depth})"
        )


def backproject(u, v, K):
    """Bearing vector of a pixel: ((u-cx)/fx, (v-cy)/fy, 1).

    Accepts scalars or arrays; the trailing axis of the result holds (bx, by, 1).
    Raises OutOfBoundsError when any pixel lies outside the image.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not np.all(K.contains(u, v)):
        raise OutOfBoundsError("pixel outside image bounds")
    bx = (u - K.cx) / K.fx
    by = (v - K.cy) / K.fy
    return np.stack([bx, by, np.ones_like(bx)], axis=-1)


def bearing_grid(K):
    """(H, W, 3) grid of bearing vectors for every pixel of the camera."""
    us = np.arange(K.width, dtype=np.float64)
    vs = np.arange(K.height, dtype=np.float64)
    bx = (us[None, :] - K.cx) / K.fx
    by = (vs[:, None] - K.cy) / K.fy
    bx = np.broadcast_to(bx, (K.height, K.width))
    by = np.broadcast_to(by, (K.height, K.width))
    return np.stack([bx, by, np.ones_like(bx)], axis=-1)


def project_points(cloud, K):
    """Project 3D camera-frame points to a sparse depth image.

    Points behind the camera (z <= 0) or whose rounded pixel falls outside
    the frame are dropped silently. When several points land on one pixel
    the smallest depth wins (nearer surface occludes the farther one).
    """
    cloud = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    if cloud.size and not np.all(np.isfinite(cloud)):
        raise InvalidConfigError("point cloud must be finite")
    if cloud.shape[0] == 0:
        return SparseDepth.empty()
    x, y, z = cloud[:, 0], cloud[:, 1], cloud[:, 2]
    front = z > 0
    x, y, z = x[front], y[front], z[front]
    u = round_half_up(K.fx * x / z + K.cx)
    v = round_half_up(K.fy * y / z + K.cy)
    inside = (u >= 0) & (u < K.width) & (v >= 0) & (v < K.height)
    u, v, z = u[inside], v[inside], z[inside]
    if u.size == 0:
        return SparseDepth.empty()
    # Sort by (v, u, z); the first entry of each pixel run has the min depth.
    order = np.lexsort((z, u, v))
    u, v, z = u[order], v[order], z[order]
    keep = np.ones(u.size, dtype=bool)
    keep[1:] = (u[1:] != u[:-1]) | (v[1:] != v[:-1])
    return SparseDepth(u[keep], v[keep], z[keep])


def sparse_to_image(sd, K):
    """Densify a sparse depth set: NaN everywhere except the listed pixels."""
    if not np.all(K.contains(sd.u, sd.v)):
        raise OutOfBoundsError("sparse depth entry outside image bounds")
    img = np.full(K.shape, np.nan)
    img[sd.v, sd.u] = sd.z
    return img


def sparse_points(sd, K):
    """Backproject sparse entries to (N, 3) camera-frame points p = z * b."""
    if len(sd) == 0:
        return np.empty((0, 3))
    b = backproject(sd.u, sd.v, K)
    return b * sd.z[:, None]


def depth_to_points(depth, K):
    """Backproject every valid pixel of a dense depth image.

    Returns (points, (vs, us)) where points is (N, 3) and the index arrays
    locate each point's pixel.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != K.shape:
        raise InvalidConfigError("depth image does not match camera dimensions")
    vs, us = np.nonzero(valid_depth_mask(depth))
    b = backproject(us, vs, K)
    return b * depth[vs, us][:, None], (vs, us)
