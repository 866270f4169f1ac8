"""Chart-level fields and derivative plumbing.

Points of the configuration manifold are represented by plain 1-D
float64 arrays in a fixed chart; ``as_point`` is the boundary
validator. Field objects bundle an evaluation callable with the chart
dimension and, optionally, an exact derivative closure that overrides
the default central-difference jacobian.

All finite differencing uses componentwise steps
``h_K = 1e-6 * max(1, |z_K|)`` unless an explicit step is passed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DifferentiationFailure, SingularMetric

__all__ = [
    "as_point",
    "jacobian",
    "MetricField",
    "ScalarField",
    "PfaffianSystem",
    "sharp",
    "flat",
    "metric_inverse",
    "COND_LIMIT",
]

# condition-number ceiling for metric inversion
COND_LIMIT = 1e12

_FD_SCALE = 1e-6


def as_point(z, dim: int | None = None) -> np.ndarray:
    """Validate and convert a chart point to a 1-D float64 array.

    Parameters
    ----------
    z : array_like
        Coordinates in the chart.
    dim : int, optional
        Expected dimension; mismatches raise ValueError.
    """
    arr = np.asarray(z, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"chart point must be 1-D, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"chart point has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("chart point has non-finite coordinates")
    return arr


def fd_steps(z: np.ndarray, h=None) -> np.ndarray:
    """Componentwise central-difference steps for differentiating at z."""
    z = np.asarray(z, dtype=float)
    if h is None:
        return _FD_SCALE * np.maximum(1.0, np.abs(z))
    h_arr = np.broadcast_to(np.asarray(h, dtype=float), z.shape).copy()
    if np.any(h_arr <= 0):
        raise ValueError("finite-difference step must be positive")
    return h_arr


def jacobian(f: Callable, z, h=None) -> np.ndarray:
    """Central-difference derivative of a field along each coordinate.

    Parameters
    ----------
    f : callable
        Maps a point (n,) to a scalar or an ndarray of any fixed shape S.
    z : array_like
        Point of evaluation.
    h : float or array_like, optional
        Step override; default is ``1e-6 * max(1, |z_K|)`` per component.

    Returns
    -------
    ndarray
        Shape S + (n,); the last axis indexes the differentiation
        direction, e.g. a metric field returns D[I, J, K] = dg_IJ/dz^K.

    Raises
    ------
    DifferentiationFailure
        If any stencil evaluation is non-finite.
    """
    z = as_point(z)
    n = z.shape[0]
    steps = fd_steps(z, h)
    cols = []
    for k in range(n):
        zp = z.copy()
        zm = z.copy()
        zp[k] += steps[k]
        zm[k] -= steps[k]
        fp = np.asarray(f(zp), dtype=float)
        fm = np.asarray(f(zm), dtype=float)
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise DifferentiationFailure(
                f"field evaluated to a non-finite value near z[{k}] = {z[k]!r}"
            )
        cols.append((fp - fm) / (2.0 * steps[k]))
    return np.stack(cols, axis=-1)


def metric_inverse(g: np.ndarray) -> np.ndarray:
    """Invert a metric matrix, guarding against near-singularity.

    Inversion is LAPACK LU with partial pivoting; the 2-norm condition
    number is estimated first and values above COND_LIMIT raise
    SingularMetric.
    """
    g = np.asarray(g, dtype=float)
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"metric condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return np.linalg.inv(g)


@dataclass(frozen=True)
class MetricField:
    """Riemannian metric in a chart.

    Parameters
    ----------
    dim : int
        Chart dimension n.
    eval : callable
        Maps a point (n,) to the metric matrix (n, n).
    d_eval : callable, optional
        Exact derivative closure returning (n, n, n) with
        D[I, J, K] = dg_IJ/dz^K; overrides finite differencing.
    """

    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    d_eval: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        g = np.asarray(self.eval(z), dtype=float)
        if g.shape != (self.dim, self.dim):
            raise ValueError(f"metric must have shape {(self.dim, self.dim)}, got {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("metric evaluated to non-finite entries")
        scale = max(1.0, float(np.abs(g).max()))
        if np.abs(g - g.T).max() > 1e-12 * scale:
            raise ValueError("metric is not symmetric to 1e-12")
        return g

    def jacobian_at(self, z) -> np.ndarray:
        """dg_IJ/dz^K as an (n, n, n) array, exact closure if registered."""
        z = as_point(z, self.dim)
        if self.d_eval is not None:
            return np.asarray(self.d_eval(z), dtype=float)
        return jacobian(self.eval, z)

    def validate_at(self, z) -> None:
        """Thorough check (symmetry plus positive-definiteness) at a point."""
        g = self(z)
        eigs = np.linalg.eigvalsh(g)
        if eigs.min() <= 0:
            raise ValueError(f"metric is not positive definite (min eigenvalue {eigs.min():.3e})")


@dataclass(frozen=True)
class ScalarField:
    """Scalar function on the chart with optional exact gradient."""

    dim: int
    eval: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, z) -> float:
        z = as_point(z, self.dim)
        value = float(self.eval(z))
        if not np.isfinite(value):
            raise ValueError("scalar field evaluated to a non-finite value")
        return value

    def gradient_at(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        if self.grad is not None:
            return np.asarray(self.grad(z), dtype=float)
        return jacobian(lambda p: float(self.eval(p)), z)

    @staticmethod
    def zero(dim: int) -> "ScalarField":
        return ScalarField(dim=dim, eval=lambda z: 0.0, grad=lambda z: np.zeros(dim))


@dataclass(frozen=True)
class PfaffianSystem:
    """Linear velocity constraints A(z) v + B(t) = 0.

    Parameters
    ----------
    dim : int
        Chart dimension n.
    m : int
        Number of constraint rows.
    eval : callable
        Maps a point (n,) to the coefficient matrix A (m, n); rows are
        the constraint covectors.
    rhs : callable, optional
        Affine inhomogeneity B(t) -> (m,); defaults to zero.
    d_eval : callable, optional
        Exact derivative (m, n, n), last axis the direction; overrides FD.
    rhs_dot : callable, optional
        Exact dB/dt; otherwise forward difference with step 1e-8.
    """

    dim: int
    m: int
    eval: Callable[[np.ndarray], np.ndarray]
    rhs: Callable[[float], np.ndarray] | None = None
    d_eval: Callable[[np.ndarray], np.ndarray] | None = None
    rhs_dot: Callable[[float], np.ndarray] | None = None

    def matrix_at(self, z) -> np.ndarray:
        z = as_point(z, self.dim)
        a = np.asarray(self.eval(z), dtype=float)
        if a.shape != (self.m, self.dim):
            raise ValueError(f"constraint matrix must have shape {(self.m, self.dim)}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("constraint matrix evaluated to non-finite entries")
        return a

    def rhs_at(self, t: float) -> np.ndarray:
        if self.rhs is None:
            return np.zeros(self.m)
        b = np.asarray(self.rhs(float(t)), dtype=float)
        if b.shape != (self.m,):
            raise ValueError(f"constraint rhs must have shape {(self.m,)}, got {b.shape}")
        return b

    def jacobian_at(self, z) -> np.ndarray:
        """dA/dz as (m, n, n), exact closure if registered."""
        z = as_point(z, self.dim)
        if self.d_eval is not None:
            return np.asarray(self.d_eval(z), dtype=float)
        return jacobian(self.eval, z)

    def rhs_dot_at(self, t: float) -> np.ndarray:
        if self.rhs is None:
            return np.zeros(self.m)
        if self.rhs_dot is not None:
            return np.asarray(self.rhs_dot(float(t)), dtype=float)
        h = 1e-8
        return (self.rhs_at(t + h) - self.rhs_at(t)) / h

    def residual(self, z, v, t: float = 0.0) -> np.ndarray:
        """Constraint residual A(z) v + B(t), one entry per row."""
        v = as_point(v, self.dim)
        return self.matrix_at(z) @ v + self.rhs_at(t)


def sharp(g: MetricField, z, phi) -> np.ndarray:
    """Raise a covector: the vector X with g(X, .) = phi.

    Computed as g(z)^{-1} phi with the SingularMetric guard.
    """
    z = as_point(z, g.dim)
    phi = as_point(phi, g.dim)
    gmat = g(z)
    cond = np.linalg.cond(gmat)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"metric condition number {cond:.3e} exceeds {COND_LIMIT:.0e}")
    return np.linalg.solve(gmat, phi)


def flat(g: MetricField, z, x) -> np.ndarray:
    """Lower a vector: the covector g(X, .)."""
    z = as_point(z, g.dim)
    x = as_point(x, g.dim)
    return g(z) @ x
