"""Core types: field evaluation, boundary classification, sliding data."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filippov_lab.errors import CrossingError, DegenerateError, TwoFoldError
from filippov_lab.systems import (
    AffineField,
    BoundaryPointClass,
    PiecewiseSystem,
    ReducedSystem,
    Side,
    SlidingData,
    classify_boundary_point,
    eval_field,
    reduced_sliding_matrix,
    sign_tolerance,
    sliding_data,
    snap_sign,
    surface_sample_grid,
)

# paper-4d sliding matrix, hand product of (I - c e1^T/c1) A
C_4D = np.array([
    [0.0, 0.0, 0.0, 0.0],
    [-9.04, 0.4, 1.0, 0.0],
    [-3.98, -0.2, 0.0, 1.0],
    [-0.396, -0.04, 0.0, 0.0],
])


def constant_system(left_first, right_first):
    """2d system whose pieces are constant with the given x1 components."""
    z = np.zeros((2, 2))
    return PiecewiseSystem(
        2,
        AffineField(z, np.array([left_first, 1.0])),
        AffineField(z, np.array([right_first, 1.0])),
    )


class TestEvalField:
    def test_left_piece_hand_value(self, reduced_4d):
        got = eval_field(reduced_4d.as_system(), Side.LEFT, [0.0, 1.0, 0.0, 0.0])
        np.testing.assert_allclose(got, [1.0, 0.0, 0.0, 0.0], atol=0)

    def test_right_piece_is_constant(self, reduced_4d):
        ps = reduced_4d.as_system()
        want = np.array([-1.0, 0.4, -0.2, -0.04])
        for x in ([0.0, 0.0, 0.0, 0.0], [3.0, -2.0, 5.0, 0.1], [1e6, 0, 0, 0]):
            np.testing.assert_array_equal(eval_field(ps, Side.RIGHT, x), want)

    def test_linear_piece_vanishes_at_origin(self, c10_full):
        got = eval_field(c10_full, Side.LEFT, [0.0, 0.0])
        np.testing.assert_array_equal(got, [0.0, 0.0])

    def test_affine_agrees_with_direct_product(self, rng):
        M = rng.standard_normal((3, 3))
        b = rng.standard_normal(3)
        ps = PiecewiseSystem(3, AffineField(M, b), AffineField(M, b))
        for _ in range(20):
            x = rng.uniform(-5, 5, 3)
            want = M @ x + b
            got = eval_field(ps, Side.LEFT, x)
            assert np.max(np.abs(got - want)) <= 1e-14 * (1 + np.linalg.norm(want))


class TestClassification:
    def test_attracting_sliding(self, reduced_4d):
        cls = classify_boundary_point(reduced_4d.as_system(), [0.0, 1.0, 0.0, 0.0])
        assert cls is BoundaryPointClass.ATTRACTING_SLIDING

    def test_crossing(self, reduced_4d):
        cls = classify_boundary_point(reduced_4d.as_system(), [0.0, -1.0, 0.0, 0.0])
        assert cls is BoundaryPointClass.CROSSING

    def test_tangency_left(self, reduced_4d):
        cls = classify_boundary_point(reduced_4d.as_system(), [0.0, 0.0, -1.0, 0.0])
        assert cls is BoundaryPointClass.TANGENCY_LEFT

    @pytest.mark.parametrize(
        "fl1,fr1,want",
        [
            (1.0, 1.0, BoundaryPointClass.CROSSING),
            (-1.0, -1.0, BoundaryPointClass.CROSSING),
            (1.0, -1.0, BoundaryPointClass.ATTRACTING_SLIDING),
            (-1.0, 1.0, BoundaryPointClass.REPELLING_SLIDING),
            (0.0, 1.0, BoundaryPointClass.TANGENCY_LEFT),
            (0.0, -1.0, BoundaryPointClass.TANGENCY_LEFT),
            (1.0, 0.0, BoundaryPointClass.TANGENCY_RIGHT),
            (-1.0, 0.0, BoundaryPointClass.TANGENCY_RIGHT),
            (0.0, 0.0, BoundaryPointClass.TWO_FOLD),
        ],
    )
    def test_total_over_sign_pairs(self, fl1, fr1, want):
        ps = constant_system(fl1, fr1)
        assert classify_boundary_point(ps, [0.0, 0.7]) is want

    @pytest.mark.parametrize("sigma", [0.25, 1.0, 40.0])
    @pytest.mark.parametrize("fl1,fr1", [(1.0, -1.0), (-1.0, 1.0), (2.0, 3.0)])
    def test_invariant_under_positive_rescaling(self, sigma, fl1, fr1):
        base = classify_boundary_point(constant_system(fl1, fr1), [0.0, 0.7])
        left_scaled = classify_boundary_point(
            constant_system(sigma * fl1, fr1), [0.0, 0.7]
        )
        right_scaled = classify_boundary_point(
            constant_system(fl1, sigma * fr1), [0.0, 0.7]
        )
        assert left_scaled is base
        assert right_scaled is base

    def test_snap_sign(self):
        assert snap_sign(0.5, 1e-12) == 1
        assert snap_sign(-0.5, 1e-12) == -1
        assert snap_sign(1e-15, 1e-12) == 0
        assert snap_sign(-1e-15, 1e-12) == 0

    def test_sign_tolerance_scales_with_state(self):
        small = sign_tolerance(np.array([0.0, 1.0]))
        large = sign_tolerance(np.array([0.0, 1e6]))
        assert 0 < small < large


class TestSlidingData:
    def test_hand_value_midpoint(self, reduced_4d):
        sd = sliding_data(reduced_4d.as_system(), [0.0, 1.0, 0.0, 0.0])
        assert isinstance(sd, SlidingData)
        assert sd.weight == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(sd.velocity, [0.0, 0.2, -0.1, -0.02], atol=1e-15)

    def test_tangency_left_gives_left_field(self, reduced_4d):
        # f^L1 = x2 = 0 here so the convex weight collapses to 0
        sd = sliding_data(reduced_4d.as_system(), [0.0, 0.0, -1.0, 0.0])
        assert sd.weight == 0.0
        np.testing.assert_allclose(sd.velocity, [0.0, -1.0, 0.0, 0.0], atol=1e-15)

    def test_tangency_right_gives_right_field(self):
        ps = constant_system(2.0, 0.0)
        sd = sliding_data(ps, [0.0, 0.3])
        assert sd.weight == 1.0
        np.testing.assert_array_equal(sd.velocity, [0.0, 1.0])

    def test_two_fold_error(self, c10_reduced):
        with pytest.raises(TwoFoldError):
            sliding_data(c10_reduced.as_system(), [0.0, 0.0])

    def test_crossing_error(self, reduced_4d):
        with pytest.raises(CrossingError):
            sliding_data(reduced_4d.as_system(), [0.0, -1.0, 0.0, 0.0])

    @given(
        x2=st.floats(0.01, 10.0),
        x3=st.floats(-10.0, 10.0),
        x4=st.floats(-10.0, 10.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_sliding_invariants(self, x2, x3, x4):
        from filippov_lab.catalog import get_builtin

        ps = get_builtin("paper-4d").as_system()
        x = np.array([0.0, x2, x3, x4])
        fl = eval_field(ps, Side.LEFT, x)
        fr = eval_field(ps, Side.RIGHT, x)
        sd = sliding_data(ps, x)
        scale = 1e-12 * (1 + np.linalg.norm(fl) + np.linalg.norm(fr))
        assert abs(sd.velocity[0]) < scale
        assert 0.0 <= sd.weight <= 1.0
        convex = (1 - sd.weight) * fl + sd.weight * fr
        assert np.linalg.norm(sd.velocity - convex) < scale


class TestReducedSlidingMatrix:
    def test_two_dimensional_hand_value(self):
        rs = ReducedSystem(np.eye(2), np.array([-1.0, 0.0]))
        C = reduced_sliding_matrix(rs)
        np.testing.assert_array_equal(C, [[0.0, 0.0], [0.0, 1.0]])

    def test_first_row_is_zero(self, reduced_4d, rng):
        np.testing.assert_array_equal(reduced_sliding_matrix(reduced_4d)[0], 0.0)
        for _ in range(10):
            A = rng.standard_normal((4, 4))
            c = rng.standard_normal(4)
            c[0] = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0)
            C = reduced_sliding_matrix(ReducedSystem(A, c))
            assert np.max(np.abs(C[0])) < 1e-14 * (1 + np.max(np.abs(A)))

    def test_golden_4d_matrix(self, reduced_4d):
        np.testing.assert_allclose(
            reduced_sliding_matrix(reduced_4d), C_4D, rtol=0, atol=1e-14
        )

    def test_degenerate_when_c1_zero(self, c10_reduced):
        with pytest.raises(DegenerateError):
            reduced_sliding_matrix(c10_reduced)

    def test_matrix_action_matches_sliding_velocity(self, reduced_4d):
        # on the surface the sliding velocity is (1 - weight) * C x
        C = reduced_sliding_matrix(reduced_4d)
        ps = reduced_4d.as_system()
        x = np.array([0.0, 0.7, -0.3, 0.11])
        sd = sliding_data(ps, x)
        np.testing.assert_allclose(
            (1.0 - sd.weight) * (C @ x), sd.velocity, rtol=0, atol=1e-14
        )

    def test_matrix_action_hand_value(self, reduced_4d):
        C = reduced_sliding_matrix(reduced_4d)
        np.testing.assert_allclose(
            C @ np.array([0.0, 1.0, 0.0, 0.0]), [0.0, 0.4, -0.2, -0.04], atol=1e-15
        )

    def test_parallel_to_sliding_field(self, reduced_4d, rng):
        C = reduced_sliding_matrix(reduced_4d)
        ps = reduced_4d.as_system()
        for _ in range(50):
            x = np.array([0.0, *rng.uniform(0.05, 3.0, 1), *rng.uniform(-3, 3, 2)])
            sd = sliding_data(ps, x)
            if not 0 < sd.weight < 1:
                continue
            v, w = sd.velocity, C @ x
            nv, nw = np.linalg.norm(v), np.linalg.norm(w)
            if nv == 0 or nw == 0:
                continue
            cross = v / nv - w / nw
            assert np.linalg.norm(cross) < 1e-10


class TestSurfaceGrid:
    def test_shape_and_membership(self):
        pts = surface_sample_grid(4, radius=2.0, points_per_axis=5)
        assert pts.shape[1] == 4
        assert pts.shape[0] == 5 ** 3
        np.testing.assert_array_equal(pts[:, 0], 0.0)
        assert np.max(np.abs(pts[:, 1:])) <= 2.0

    def test_planar_grid(self):
        pts = surface_sample_grid(2, radius=1.0, points_per_axis=7)
        assert pts.shape == (7, 2)
        np.testing.assert_array_equal(pts[:, 0], 0.0)
