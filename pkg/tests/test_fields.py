"""Field containers and finite differencing."""

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projmech import (
    DifferentiationFailure,
    MetricField,
    PfaffianSystem,
    ScalarField,
    SingularMetric,
    as_point,
    flat,
    jacobian,
    metric_inverse,
    sharp,
)


def test_as_point_coerces_and_validates():
    z = as_point([1, 2, 3])
    assert z.dtype == np.float64 and z.shape == (3,)
    with pytest.raises(ValueError):
        as_point([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        as_point([[1.0, 2.0]])
    with pytest.raises(ValueError):
        as_point([np.nan, 0.0])


def test_jacobian_scalar_matches_exact_gradient():
    def f(z):
        return np.sin(z[0]) * z[1] + z[2] ** 3

    z = np.array([0.4, -1.2, 0.7])
    exact = np.array([np.cos(z[0]) * z[1], np.sin(z[0]), 3 * z[2] ** 2])
    npt.assert_allclose(jacobian(f, z), exact, atol=1e-9)


def test_jacobian_matrix_valued_stacks_last_axis():
    # dF[i, j, k] must be the derivative of F[i, j] along z^k
    def f(z):
        return np.array([[z[0] ** 2, z[0] * z[1]], [z[1], 1.0]])

    z = np.array([1.5, -2.0])
    d = jacobian(f, z)
    assert d.shape == (2, 2, 2)
    npt.assert_allclose(d[0, 0], [2 * z[0], 0.0], atol=1e-9)
    npt.assert_allclose(d[0, 1], [z[1], z[0]], atol=1e-9)
    npt.assert_allclose(d[1, 0], [0.0, 1.0], atol=1e-9)
    npt.assert_allclose(d[1, 1], [0.0, 0.0], atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_jacobian_of_linear_map_is_exact(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 6))
    mat = rng.uniform(-2, 2, size=(n, n))
    z = rng.uniform(-1, 1, size=n)
    npt.assert_allclose(jacobian(lambda p: mat @ p, z), mat, atol=1e-9)


@pytest.mark.filterwarnings("ignore:invalid value encountered")
def test_jacobian_rejects_non_finite_stencils():
    def f(z):
        return np.sqrt(z[0])  # nan on the negative side of the stencil

    with pytest.raises(DifferentiationFailure):
        jacobian(f, np.array([0.0]))


def test_metric_field_validates_symmetry_and_shape():
    good = MetricField(dim=2, eval=lambda z: np.eye(2))
    npt.assert_array_equal(good(np.zeros(2)), np.eye(2))

    skewed = MetricField(dim=2, eval=lambda z: np.array([[1.0, 0.5], [0.2, 1.0]]))
    with pytest.raises(ValueError, match="symmetric"):
        skewed(np.zeros(2))

    wrong = MetricField(dim=2, eval=lambda z: np.eye(3))
    with pytest.raises(ValueError):
        wrong(np.zeros(2))


def test_metric_field_positive_definiteness_check():
    indefinite = MetricField(dim=2, eval=lambda z: np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="positive definite"):
        indefinite.validate_at(np.zeros(2))


def test_metric_inverse_guards_conditioning():
    npt.assert_allclose(metric_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    with pytest.raises(SingularMetric):
        metric_inverse(np.diag([1.0, 1e-14]))


def test_metric_field_jacobian_exact_override():
    def d_eval(z):
        out = np.zeros((2, 2, 2))
        out[0, 0, 1] = 1.0
        return out

    field = MetricField(dim=2, eval=lambda z: np.diag([1.0 + z[1], 1.0]), d_eval=d_eval)
    npt.assert_array_equal(field.jacobian_at(np.array([0.3, 0.4])), d_eval(None))


def test_scalar_field_gradient_paths():
    fd = ScalarField(dim=2, eval=lambda z: z[0] ** 2 + z[1])
    npt.assert_allclose(fd.gradient_at(np.array([1.0, 2.0])), [2.0, 1.0], atol=1e-9)

    exact = ScalarField(dim=2, eval=lambda z: z[0] ** 2, grad=lambda z: np.array([2 * z[0], 0.0]))
    npt.assert_array_equal(exact.gradient_at(np.array([3.0, 0.0])), [6.0, 0.0])

    zero = ScalarField.zero(3)
    assert zero(np.ones(3)) == 0.0
    npt.assert_array_equal(zero.gradient_at(np.ones(3)), np.zeros(3))


def test_pfaffian_system_evaluation_and_residual():
    sys_ = PfaffianSystem(dim=3, m=1, eval=lambda z: np.array([[-z[1], 0.0, 1.0]]))
    z = np.array([0.0, 2.0, 0.0])
    npt.assert_array_equal(sys_.matrix_at(z), [[-2.0, 0.0, 1.0]])
    npt.assert_array_equal(sys_.rhs_at(0.0), [0.0])
    # v = (1, 0, 2) satisfies -y vx + vz = 0 at y = 2
    npt.assert_allclose(sys_.residual(z, np.array([1.0, 0.0, 2.0]), 0.0), [0.0], atol=1e-15)

    d = sys_.jacobian_at(z)
    assert d.shape == (1, 3, 3)
    npt.assert_allclose(d[0, 0], [0.0, -1.0, 0.0], atol=1e-9)

    wrong = PfaffianSystem(dim=3, m=2, eval=lambda z: np.zeros((1, 3)))
    with pytest.raises(ValueError):
        wrong.matrix_at(z)


def test_pfaffian_rhs_derivative():
    sys_ = PfaffianSystem(
        dim=2, m=1, eval=lambda z: np.array([[1.0, 0.0]]), rhs=lambda t: np.array([np.sin(t)])
    )
    npt.assert_allclose(sys_.rhs_dot_at(0.5), [np.cos(0.5)], atol=1e-7)

    exact = PfaffianSystem(
        dim=2,
        m=1,
        eval=lambda z: np.array([[1.0, 0.0]]),
        rhs=lambda t: np.array([np.sin(t)]),
        rhs_dot=lambda t: np.array([np.cos(t)]),
    )
    npt.assert_array_equal(exact.rhs_dot_at(0.5), [np.cos(0.5)])


def test_sharp_flat_roundtrip():
    g = MetricField(dim=2, eval=lambda z: np.array([[2.0, 0.3], [0.3, 1.0]]))
    phi = np.array([0.7, -1.1])
    vec = sharp(g, np.zeros(2), phi)
    npt.assert_allclose(flat(g, np.zeros(2), vec), phi, atol=1e-12)
