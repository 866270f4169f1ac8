"""Projector pairs, oblique frames and adapted metrics."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projmech import (
    Convention,
    DegenerateConstraints,
    MetricField,
    ObliqueFrame,
    adapted_metric,
    oblique_pair,
    orthogonal_pair,
    q_projector,
)
from projmech.checks import projector_identity_violation


def _sleigh_inputs(theta, r, J):
    g = np.diag([1.0, 1.0, J])
    a = np.array([[-np.sin(theta), np.cos(theta), -r]])
    return g, a


class TestOrthogonalPair:
    def test_sleigh_frozen_matrix_theta_zero(self):
        # independent literal: J/(J+r^2) * [[s^2,-cs,rs],[-cs,c^2,-rc],[rs/J,-rc/J,r^2/J]]
        # at theta=0, r=1, J=2
        g, a = _sleigh_inputs(0.0, 1.0, 2.0)
        pair = orthogonal_pair(g, a, np.zeros(3))
        expected = np.array(
            [
                [0.0, 0.0, 0.0],
                [0.0, 2.0 / 3.0, -2.0 / 3.0],
                [0.0, -1.0 / 3.0, 1.0 / 3.0],
            ]
        )
        npt.assert_allclose(pair.q, expected, atol=1e-14)
        assert pair.convention is Convention.CONSTRAINT_TANGENTIAL

    def test_sleigh_frozen_matrix_theta_right_angle(self):
        g, a = _sleigh_inputs(np.pi / 2, 1.0, 2.0)
        pair = orthogonal_pair(g, a, np.zeros(3))
        expected = np.array(
            [
                [2.0 / 3.0, 0.0, 2.0 / 3.0],
                [0.0, 0.0, 0.0],
                [1.0 / 3.0, 0.0, 1.0 / 3.0],
            ]
        )
        npt.assert_allclose(pair.q, expected, atol=1e-14)

    def test_heisenberg_frozen_matrices(self):
        # Q = 1/(1+y^2) [[y^2,0,-y],[0,0,0],[-y,0,1]]
        a = np.array([[-1.0, 0.0, 1.0]])  # y = 1
        pair = orthogonal_pair(np.eye(3), a, np.zeros(3))
        expected = 0.5 * np.array([[1.0, 0.0, -1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 1.0]])
        npt.assert_allclose(pair.q, expected, atol=1e-14)

        flat_a = np.array([[0.0, 0.0, 1.0]])  # y = 0
        pair0 = orthogonal_pair(np.eye(3), flat_a, np.zeros(3))
        npt.assert_allclose(pair0.q, np.diag([0.0, 0.0, 1.0]), atol=1e-15)

    def test_accepts_field_objects(self):
        g = MetricField(dim=3, eval=lambda z: np.diag([1.0, 1.0, 2.0]))
        pair = orthogonal_pair(g, np.array([[0.0, 1.0, -1.0]]), np.zeros(3))
        assert projector_identity_violation(pair) < 1e-13

    def test_no_constraints_gives_identity_p(self):
        pair = orthogonal_pair(np.eye(2), np.zeros((0, 2)), np.zeros(2))
        npt.assert_array_equal(pair.p, np.eye(2))
        npt.assert_array_equal(pair.q, np.zeros((2, 2)))

    def test_degenerate_rows_raise(self):
        a = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        with pytest.raises(DegenerateConstraints):
            orthogonal_pair(np.eye(3), a, np.zeros(3))

    def test_too_many_rows_raise(self):
        a = np.eye(3)
        with pytest.raises(DegenerateConstraints):
            orthogonal_pair(np.eye(2), a[:, :2] @ np.eye(2), np.zeros(2))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_randomized_identities(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, n))
        basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
        g = (basis * rng.uniform(0.3, 3.0, size=n)) @ basis.T
        g = 0.5 * (g + g.T)
        a = rng.standard_normal((m, n))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] < 1e-2 * sv[0]:
            return  # skip badly conditioned draws
        pair = orthogonal_pair(g, a, np.zeros(n))
        assert projector_identity_violation(pair) < 1e-10
        assert np.abs(a @ pair.p).max() < 1e-10
        # self-adjointness with respect to g
        gq = g @ pair.q
        assert np.abs(gq - gq.T).max() < 1e-10

    def test_swapped_exchanges_and_retags(self):
        g, a = _sleigh_inputs(0.3, 1.0, 2.0)
        pair = orthogonal_pair(g, a, np.zeros(3))
        other = pair.swapped()
        npt.assert_array_equal(other.p, pair.q)
        npt.assert_array_equal(other.q, pair.p)
        assert other.convention is Convention.COMPLEMENT_TANGENTIAL
        npt.assert_array_equal(other.swapped().p, pair.p)
        # the almost-product tensor flips sign under relabeling
        npt.assert_array_equal(other.aps, -pair.aps)


class TestObliquePair:
    def test_heisenberg_frame_frozen(self):
        y = 0.7
        pair = oblique_pair(np.array([[-y, 0.0]]))
        expected_q = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-y, 0.0, 1.0]])
        npt.assert_array_equal(pair.q, expected_q)
        npt.assert_array_equal(pair.p, np.eye(3) - expected_q)
        assert pair.convention is Convention.COMPLEMENT_TANGENTIAL
        assert projector_identity_violation(pair) == 0.0

    def test_frame_geometry(self):
        frame = ObliqueFrame(gamma=np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert frame.n_base == 2 and frame.n_perp == 2 and frame.dim == 4
        npt.assert_array_equal(
            frame.coframe_rows(), [[1.0, 2.0, 1.0, 0.0], [3.0, 4.0, 0.0, 1.0]]
        )
        npt.assert_array_equal(
            frame.frame_columns(), [[1.0, 0.0], [0.0, 1.0], [-1.0, -2.0], [-3.0, -4.0]]
        )
        # coframe annihilates the frame: w^alpha(X_a) = 0
        npt.assert_array_equal(frame.coframe_rows() @ frame.frame_columns(), np.zeros((2, 2)))

    def test_projector_image_and_kernel(self):
        frame = ObliqueFrame(gamma=np.array([[0.5, -1.0]]))
        pair = oblique_pair(frame)
        # P fixes the frame vectors, Q kills them
        npt.assert_allclose(pair.p @ frame.frame_columns(), frame.frame_columns(), atol=1e-15)
        npt.assert_allclose(pair.q @ frame.frame_columns(), 0.0, atol=1e-15)


class TestAdaptedMetric:
    def test_heisenberg_blocks_frozen(self):
        y = 0.5
        blocks = adapted_metric(np.eye(3), np.array([[-y, 0.0]]))
        npt.assert_allclose(blocks.f_base, [[1.25, 0.0], [0.0, 1.0]], atol=1e-15)
        npt.assert_allclose(blocks.f_cross, [[2 * y], [0.0]], atol=1e-15)
        npt.assert_allclose(blocks.g_perp, [[1.0]], atol=1e-15)
        assert not blocks.is_orthogonal()
        npt.assert_allclose(blocks.reconstruct(), np.eye(3), atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_reconstruction_identity(self, seed):
        rng = np.random.default_rng(seed)
        nb = int(rng.integers(1, 4))
        npp = int(rng.integers(1, 4))
        n = nb + npp
        basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
        g = (basis * rng.uniform(0.3, 3.0, size=n)) @ basis.T
        g = 0.5 * (g + g.T)
        gamma = rng.standard_normal((npp, nb))
        blocks = adapted_metric(g, gamma)
        npt.assert_allclose(blocks.reconstruct(), g, atol=1e-12)

    def test_orthogonal_frame_collapses_cross_block(self):
        # build the metric from block-diagonal data in the adapted coframe
        rng = np.random.default_rng(5)
        gamma = rng.standard_normal((2, 2))
        f = np.diag(rng.uniform(0.5, 2.0, size=2))
        gp = np.diag(rng.uniform(0.5, 2.0, size=2))
        cof = np.block([[np.eye(2), np.zeros((2, 2))], [gamma, np.eye(2)]])
        mid = np.block([[f, np.zeros((2, 2))], [np.zeros((2, 2)), gp]])
        g = cof.T @ mid @ cof
        blocks = adapted_metric(g, gamma)
        assert blocks.is_orthogonal()
        npt.assert_allclose(blocks.f_base, f, atol=1e-12)
        npt.assert_allclose(blocks.g_perp, gp, atol=1e-12)


class TestQProjector:
    def test_matches_transverse_projector_of_constraints(self):
        # one-forms spanning the constraint rows give the same q
        g = np.diag([1.0, 1.0, 2.0])
        a = np.array([[-np.sin(0.4), np.cos(0.4), -1.0]])
        pair = orthogonal_pair(g, a, np.zeros(3))
        npt.assert_allclose(q_projector(g, a), pair.q, atol=1e-14)

    def test_orthogonal_frame_reproduces_oblique_q(self):
        # with a metric-orthogonal frame the metric-built projector must
        # coincide with the metric-free oblique one
        rng = np.random.default_rng(9)
        gamma = rng.standard_normal((2, 2))
        cof = np.block([[np.eye(2), np.zeros((2, 2))], [gamma, np.eye(2)]])
        mid = np.diag(rng.uniform(0.5, 2.0, size=4))
        g = cof.T @ mid @ cof
        frame = ObliqueFrame(gamma=gamma)
        q = q_projector(g, frame.coframe_rows())
        npt.assert_allclose(q, oblique_pair(frame).q, atol=1e-12)

    def test_rank_deficient_forms_raise(self):
        w = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(DegenerateConstraints):
            q_projector(np.eye(2), w)
