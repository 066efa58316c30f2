import numpy as np
import pytest

from planedepth import CameraIntrinsics, CameraPose, SceneConfig, render_scene


@pytest.fixture
def K():
    return CameraIntrinsics(fx=100.0, fy=100.0, cx=160.0, cy=120.0, width=320, height=240)


@pytest.fixture
def K_small():
    return CameraIntrinsics(fx=40.0, fy=40.0, cx=32.0, cy=24.0, width=64, height=48)


@pytest.fixture(scope="session")
def corner_scene():
    """A room corner view: floor plus two walls, all well visible."""
    K = CameraIntrinsics(fx=110.0, fy=110.0, cx=160.0, cy=120.0, width=320, height=240)
    cfg = SceneConfig(
        room=[6.0, 5.0, 3.0],
        pose=CameraPose(position=[1.0, 1.2, 1.5], yaw_deg=35.0, pitch_deg=-25.0),
        K=K,
    )
    return render_scene(cfg), K


@pytest.fixture(scope="session")
def wall_scene():
    """Camera facing a single wall filling the whole frame."""
    K = CameraIntrinsics(fx=260.0, fy=260.0, cx=160.0, cy=120.0, width=320, height=240)
    cfg = SceneConfig(
        room=[6.0, 5.0, 3.0],
        pose=CameraPose(position=[3.0, 2.5, 1.5]),
        K=K,
    )
    scene = render_scene(cfg)
    assert len(scene.planes) == 1  # only the facing wall is visible
    return scene, K


def smooth_image(height, width, seed=0):
    """A smooth synthetic intensity image in [0, 1]."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    img = np.zeros((height, width))
    for _ in range(3):
        kx, ky = rng.uniform(-0.05, 0.05, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        img += np.sin(kx * xs + ky * ys + phase)
    lo, hi = img.min(), img.max()
    return (img - lo) / (hi - lo)


def smooth_normal_map(height, width, seed=0):
    """A smoothly varying unit normal field, roughly facing the camera."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    kx, ky = rng.uniform(-0.03, 0.03, size=2)
    ax = 0.4 * np.sin(kx * xs + ky * ys)
    ay = 0.4 * np.cos(2 * kx * xs - ky * ys)
    nz = -np.sqrt(np.maximum(1e-6, 1.0 - ax**2 - ay**2))
    nm = np.stack([ax, ay, nz], axis=-1)
    return nm / np.linalg.norm(nm, axis=-1, keepdims=True)
