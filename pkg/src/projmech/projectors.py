"""Projector pairs and adapted-frame objects for linear velocity constraints.

Two complementary idempotents (P, Q) split each tangent space. The
metric-orthogonal pair is built from the constraint covectors by
raising their span with the inverse metric; the oblique pair is built
from frame coefficients alone and needs no metric.

Convention tags
---------------
The same pair of distributions appears in two labelings, so every
``ProjectorPair`` carries an explicit tag:

* ``CONSTRAINT_TANGENTIAL`` - P projects onto the admissible-velocity
  distribution (A P = 0, rank Q = number of constraint rows). All
  dynamics code requires this tag.
* ``COMPLEMENT_TANGENTIAL`` - the oblique labeling, where Q lands on
  the coordinate polarization spanned by the trailing chart directions.

Conversion between tags is ``swapped()``, which exchanges P and Q. The
almost-product tensor is fixed as ``aps = Q - P`` in both conventions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConstraints
from .fields import MetricField, PfaffianSystem, as_point, metric_inverse

__all__ = [
    "Convention",
    "ProjectorPair",
    "ObliqueFrame",
    "AdaptedMetricBlocks",
    "orthogonal_pair",
    "oblique_pair",
    "adapted_metric",
    "q_projector",
    "RANK_RTOL",
]

# relative singular-value threshold for constraint rank decisions
RANK_RTOL = 1e-10


class Convention(enum.Enum):
    CONSTRAINT_TANGENTIAL = "constraint-tangential"
    COMPLEMENT_TANGENTIAL = "complement-tangential"


@dataclass(frozen=True)
class ProjectorPair:
    """Complementary projector pair at a point.

    Attributes
    ----------
    p, q : ndarray
        (n, n) projector matrices with P + Q = I.
    point : ndarray
        Chart point the pair was built at.
    convention : Convention
        Labeling tag; see module docstring.
    """

    p: np.ndarray
    q: np.ndarray
    point: np.ndarray
    convention: Convention

    @property
    def dim(self) -> int:
        return self.p.shape[0]

    @property
    def aps(self) -> np.ndarray:
        """Almost-product tensor Q - P (an involution)."""
        return self.q - self.p

    def swapped(self) -> "ProjectorPair":
        """Exchange P and Q and flip the convention tag."""
        other = (
            Convention.COMPLEMENT_TANGENTIAL
            if self.convention is Convention.CONSTRAINT_TANGENTIAL
            else Convention.CONSTRAINT_TANGENTIAL
        )
        return ProjectorPair(p=self.q, q=self.p, point=self.point, convention=other)


def _constraint_matrix(constraints, z, dim: int | None) -> np.ndarray:
    if isinstance(constraints, PfaffianSystem):
        return constraints.matrix_at(z)
    a = np.atleast_2d(np.asarray(constraints, dtype=float))
    if dim is not None and a.shape[1] != dim:
        raise ValueError(f"constraint matrix has {a.shape[1]} columns, expected {dim}")
    return a


def _check_row_rank(a: np.ndarray) -> None:
    m = a.shape[0]
    if m == 0:
        return
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise DegenerateConstraints(
            f"constraint rows are rank deficient ({m} rows, "
            f"singular value ratio {0.0 if sv[0] == 0 else sv[-1] / sv[0]:.3e})"
        )


def orthogonal_pair(g, constraints, z) -> ProjectorPair:
    """Metric-orthogonal projector pair from constraint covectors.

    With A the (m, n) matrix of constraint rows at z, the transverse
    projector is

        Q = g^{-1} A^T (A g^{-1} A^T)^{-1} A,

    and P = I - Q projects onto the admissible distribution ker A along
    its g-orthogonal complement.

    Parameters
    ----------
    g : MetricField or (n, n) array
        Metric, evaluated at z if a field is passed.
    constraints : PfaffianSystem or (m, n) array
        Constraint covector rows at z.
    z : array_like
        Chart point.

    Returns
    -------
    ProjectorPair
        Tagged CONSTRAINT_TANGENTIAL.

    Raises
    ------
    DegenerateConstraints
        If the rows of A are linearly dependent (relative singular
        value below 1e-10).
    SingularMetric
        If the metric cannot be inverted reliably.
    """
    if isinstance(g, MetricField):
        z = as_point(z, g.dim)
        gmat = g(z)
    else:
        gmat = np.asarray(g, dtype=float)
        z = as_point(z, gmat.shape[0])
    n = gmat.shape[0]
    a = _constraint_matrix(constraints, z, n)
    m = a.shape[0]
    if m > n:
        raise DegenerateConstraints(f"{m} constraint rows exceed dimension {n}")
    _check_row_rank(a)
    if m == 0:
        q = np.zeros((n, n))
    else:
        ginv = metric_inverse(gmat)
        a_star = a @ ginv  # rows raised with the inverse metric
        gram = a_star @ a.T
        q = a_star.T @ np.linalg.solve(gram, a)
    p = np.eye(n) - q
    return ProjectorPair(p=p, q=q, point=z, convention=Convention.CONSTRAINT_TANGENTIAL)


@dataclass(frozen=True)
class ObliqueFrame:
    """Adapted-frame coefficients for a split chart (z^a | z^alpha).

    The first ``n_base`` coordinates carry the frame vectors
    X_a = d/dz^a - Gamma^alpha_a d/dz^alpha and the trailing
    ``n_perp`` coordinates carry Y_alpha = d/dz^alpha. The coframe
    one-forms are w^alpha = dz^alpha + Gamma^alpha_a dz^a.

    Attributes
    ----------
    gamma : ndarray
        (n_perp, n_base) coefficient array Gamma^alpha_a.
    """

    gamma: np.ndarray

    def __post_init__(self):
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        object.__setattr__(self, "gamma", gamma)

    @property
    def n_base(self) -> int:
        return self.gamma.shape[1]

    @property
    def n_perp(self) -> int:
        return self.gamma.shape[0]

    @property
    def dim(self) -> int:
        return self.n_base + self.n_perp

    def coframe_rows(self) -> np.ndarray:
        """(n_perp, n) rows of the one-forms w^alpha = dz^alpha + Gamma dz^a."""
        return np.hstack([self.gamma, np.eye(self.n_perp)])

    def frame_columns(self) -> np.ndarray:
        """(n, n_base) columns of the vectors X_a."""
        return np.vstack([np.eye(self.n_base), -self.gamma])


def oblique_pair(frame: ObliqueFrame | np.ndarray, point=None) -> ProjectorPair:
    """Oblique projector pair from frame coefficients.

    In the split chart the pair is block triangular:

        P = [[I, 0], [-Gamma, 0]],   Q = [[0, 0], [Gamma, I]].

    P projects onto span{X_a} and Q onto the trailing coordinate
    polarization span{d/dz^alpha}; no metric is involved.

    Returns
    -------
    ProjectorPair
        Tagged COMPLEMENT_TANGENTIAL.
    """
    if not isinstance(frame, ObliqueFrame):
        frame = ObliqueFrame(gamma=frame)
    nb, npp = frame.n_base, frame.n_perp
    n = nb + npp
    p = np.zeros((n, n))
    p[:nb, :nb] = np.eye(nb)
    p[nb:, :nb] = -frame.gamma
    q = np.zeros((n, n))
    q[nb:, :nb] = frame.gamma
    q[nb:, nb:] = np.eye(npp)
    z = np.zeros(n) if point is None else as_point(point, n)
    return ProjectorPair(p=p, q=q, point=z, convention=Convention.COMPLEMENT_TANGENTIAL)


@dataclass(frozen=True)
class AdaptedMetricBlocks:
    """Metric components in the adapted coframe (dz^a, w^alpha).

    Attributes
    ----------
    f_base : ndarray
        (n_base, n_base) block on the dz^a directions.
    f_cross : ndarray
        (n_base, n_perp) total cross coefficient of dz^a and w^alpha
        (both orderings combined, hence the factor 2 in its formula).
    g_perp : ndarray
        (n_perp, n_perp) block on the w^alpha directions.
    gamma : ndarray
        Frame coefficients the blocks were computed with.
    """

    f_base: np.ndarray
    f_cross: np.ndarray
    g_perp: np.ndarray
    gamma: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """Reassemble the chart-basis metric from the blocks.

        Substituting w^alpha = dz^alpha + Gamma^alpha_a dz^a must give
        back the original metric; used as a consistency check.
        """
        nb = self.f_base.shape[0]
        npp = self.g_perp.shape[0]
        n = nb + npp
        mid = np.zeros((n, n))
        mid[:nb, :nb] = self.f_base
        mid[:nb, nb:] = 0.5 * self.f_cross
        mid[nb:, :nb] = 0.5 * self.f_cross.T
        mid[nb:, nb:] = self.g_perp
        cof = np.zeros((n, n))
        cof[:nb, :nb] = np.eye(nb)
        cof[nb:, :nb] = self.gamma
        cof[nb:, nb:] = np.eye(npp)
        return cof.T @ mid @ cof

    def is_orthogonal(self, tol: float = 1e-12) -> bool:
        """True when the frame is metric-orthogonal (vanishing cross block)."""
        scale = max(1.0, float(np.abs(self.f_base).max()), float(np.abs(self.g_perp).max()))
        return float(np.abs(self.f_cross).max(initial=0.0)) <= tol * scale


def adapted_metric(g, frame: ObliqueFrame | np.ndarray, z=None) -> AdaptedMetricBlocks:
    """Express a metric in the adapted coframe of an oblique frame.

    The blocks are (cross terms symmetrized)

        F_ab  = g_ab - g_aA Gamma^A_b - g_bA Gamma^A_a
                + g_AB Gamma^A_a Gamma^B_b,
        F_aA  = 2 (g_aA - g_AB Gamma^B_a),
        G_AB  = g_AB,

    with capital indices on the trailing (perp) block.
    """
    if not isinstance(frame, ObliqueFrame):
        frame = ObliqueFrame(gamma=frame)
    if isinstance(g, MetricField):
        if z is None:
            raise ValueError("a chart point is required to evaluate a metric field")
        gmat = g(as_point(z, g.dim))
    else:
        gmat = np.asarray(g, dtype=float)
    nb, npp = frame.n_base, frame.n_perp
    if gmat.shape != (nb + npp, nb + npp):
        raise ValueError(f"metric shape {gmat.shape} does not match frame split ({nb}|{npp})")
    gamma = frame.gamma
    g_aa = gmat[:nb, :nb]
    g_ax = gmat[:nb, nb:]
    g_xx = gmat[nb:, nb:]
    cross = g_ax @ gamma  # (g_aA Gamma^A_b)
    f_base = g_aa - cross - cross.T + gamma.T @ g_xx @ gamma
    f_cross = 2.0 * (g_ax - gamma.T @ g_xx)
    return AdaptedMetricBlocks(f_base=f_base, f_cross=f_cross, g_perp=g_xx.copy(), gamma=gamma.copy())


def q_projector(g, w_forms, z=None) -> np.ndarray:
    """Metric-built transverse projector from a set of one-forms.

    With W the (k, n) matrix of form rows, the dual Gram matrix is
    G* = W g^{-1} W^T; the projector contracts its inverse with the
    raised forms:

        q = g^{-1} W^T (W g^{-1} W^T)^{-1} W.

    Its image is the g-raised span of the forms and its kernel is
    their common annihilator. When the frame is metric-orthogonal this
    coincides with the oblique pair's Q.
    """
    if isinstance(g, MetricField):
        if z is None:
            raise ValueError("a chart point is required to evaluate a metric field")
        z = as_point(z, g.dim)
        gmat = g(z)
    else:
        gmat = np.asarray(g, dtype=float)
    w = np.atleast_2d(np.asarray(w_forms, dtype=float))
    if w.shape[1] != gmat.shape[0]:
        raise ValueError(f"form rows have {w.shape[1]} components, expected {gmat.shape[0]}")
    _check_row_rank(w)
    if w.shape[0] == 0:
        return np.zeros_like(gmat)
    ginv = metric_inverse(gmat)
    raised = ginv @ w.T  # columns are the sharped forms
    gram = w @ raised
    return raised @ np.linalg.solve(gram, w)
