import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planedepth import (
    CameraIntrinsics,
    DuplicatePixelError,
    OutOfBoundsError,
    SparseDepth,
    backproject,
    project_points,
    sparse_to_image,
)
from planedepth.core import round_half_up


class TestBackproject:
    def test_principal_point(self, K):
        assert np.allclose(backproject(160, 120, K), [0.0, 0.0, 1.0])

    def test_pinhole_formula(self, K):
        assert np.allclose(backproject(210, 120, K), [0.5, 0.0, 1.0])

    def test_out_of_bounds(self, K):
        with pytest.raises(OutOfBoundsError):
            backproject(-1, 0, K)
        with pytest.raises(OutOfBoundsError):
            backproject(0, 240, K)

    def test_bz_is_exactly_one(self, K):
        b = backproject(np.arange(0, 320, 7), np.arange(0, 240, 7)[: len(range(0, 320, 7))] % 240, K)
        assert np.all(b[..., 2] == 1.0)


class TestProjectPoints:
    def test_principal_point(self, K):
        sd = project_points([(0.0, 0.0, 2.0)], K)
        assert sd.entries() == [(160, 120, 2.0)]

    def test_pinhole_formula(self, K):
        sd = project_points([(1.0, 0.0, 2.0)], K)
        assert sd.entries() == [(210, 120, 2.0)]

    def test_collision_keeps_nearest(self, K):
        sd = project_points([(0.0, 0.0, 2.0), (0.0, 0.0, 3.0)], K)
        assert sd.entries() == [(160, 120, 2.0)]

    def test_behind_camera_dropped(self, K):
        assert len(project_points([(0.0, 0.0, -1.0)], K)) == 0

    def test_out_of_frame_dropped(self, K):
        assert len(project_points([(100.0, 0.0, 1.0)], K)) == 0

    def test_rounding_ties_toward_positive(self, K):
        # u = 100*0.005/1 + 160 = 160.5 rounds to 161
        sd = project_points([(0.005, 0.0, 1.0)], K)
        assert sd.entries()[0][:2] == (161, 120)


class TestSparseToImage:
    def test_empty(self, K):
        img = sparse_to_image(SparseDepth.empty(), K)
        assert img.shape == (240, 320)
        assert np.all(np.isnan(img))

    def test_single_entry(self, K):
        img = sparse_to_image(SparseDepth.from_entries([(0, 0, 1.5)]), K)
        assert img[0, 0] == 1.5
        assert np.count_nonzero(np.isfinite(img)) == 1

    def test_duplicate_pixel_rejected(self):
        with pytest.raises(DuplicatePixelError):
            SparseDepth.from_entries([(3, 4, 1.0), (3, 4, 2.0)])

    def test_out_of_bounds_entry(self, K):
        sd = SparseDepth.from_entries([(1000, 0, 1.0)])
        with pytest.raises(OutOfBoundsError):
            sparse_to_image(sd, K)


def test_round_half_up():
    assert list(round_half_up(np.array([0.5, -0.5, 1.49, 1.5, -1.5]))) == [1, 0, 1, 2, -1]


@st.composite
def intrinsics(draw):
    width = draw(st.integers(8, 160))
    height = draw(st.integers(8, 160))
    fx = draw(st.floats(10.0, 500.0))
    fy = draw(st.floats(10.0, 500.0))
    cx = draw(st.floats(0.0, width - 1))
    cy = draw(st.floats(0.0, height - 1))
    return CameraIntrinsics(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height)


@settings(max_examples=150, deadline=None)
@given(intrinsics(), st.data())
def test_projection_roundtrip(K, data):
    u = data.draw(st.integers(0, K.width - 1))
    v = data.draw(st.integers(0, K.height - 1))
    z = data.draw(st.floats(0.05, 19.0))
    p = backproject(u, v, K) * z
    sd = project_points([p], K)
    assert len(sd) == 1
    (u2, v2, z2) = sd.entries()[0]
    assert (u2, v2) == (u, v)
    assert abs(z2 - z) < 1e-9


@st.composite
def clouds(draw):
    n = draw(st.integers(0, 40))
    pts = draw(
        st.lists(
            st.tuples(
                st.floats(-30, 30), st.floats(-30, 30), st.floats(-5, 19)
            ),
            min_size=n,
            max_size=n,
        )
    )
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


@settings(max_examples=150, deadline=None)
@given(intrinsics(), clouds())
def test_projection_output_invariants(K, cloud):
    sd = project_points(cloud, K)
    assert np.all(sd.z > 0)
    assert np.all((sd.u >= 0) & (sd.u < K.width))
    assert np.all((sd.v >= 0) & (sd.v < K.height))
    pix = sd.u.astype(np.int64) * K.height + sd.v
    assert len(np.unique(pix)) == len(sd)


@settings(max_examples=100, deadline=None)
@given(intrinsics(), clouds(), st.randoms(use_true_random=False))
def test_projection_order_independent(K, cloud, rnd):
    perm = list(range(cloud.shape[0]))
    rnd.shuffle(perm)
    assert project_points(cloud, K) == project_points(cloud[perm], K)
