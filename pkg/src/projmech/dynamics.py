"""Projected Euler-Lagrange dynamics for linearly constrained systems.

The Lagrangian is kinetic-minus-potential, L = (1/2) g_IJ(z) v^I v^J -
V(z), subject to linear velocity constraints A(z) v + B(t) = 0. Writing
the Euler-Lagrange covector

    E_I = g_IJ a^J + h_I,
    h_I = (dg_IJ/dz^K - (1/2) dg_JK/dz^I) v^J v^K + dV/dz^I,

the admissible motion satisfies the projected equation P (a + g^{-1} h)
= 0, i.e. the raised covector g^{-1}E has no component along the
admissible distribution (equivalently E lies in the span of the
constraint rows, so constraint forces do no work on admissible
displacements). Together with the differentiated constraint
A a = -(dA/dt) v - dB/dt this determines the acceleration uniquely; the
implementation solves the stacked (n+m) x n system by least squares and
rejects solutions whose residual exceeds 1e-10.

Integration is classical RK4 with a mandatory post-step velocity
projection v <- P v + v_B (v_B the minimum-norm solution of
A v_B = -B); there is no drift-feedback stabilization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import (
    DegenerateConstraints,
    DifferentiationFailure,
    IllPosedDynamics,
    IntegrationFailure,
    SingularMetric,
)
from .fields import MetricField, PfaffianSystem, ScalarField, as_point, metric_inverse
from .kernels import FieldCallbacks, build_stepper
from .projectors import Convention, ProjectorPair, orthogonal_pair

__all__ = [
    "State",
    "Trajectory",
    "LagrangianSystem",
    "el_residual",
    "constrained_accel",
    "integrate",
    "energy",
    "project_initial_velocity",
    "CONSTRAINT_TOL",
    "ACCEL_RESID_TOL",
]

# admissibility tolerance on |A v + B| for initial states
CONSTRAINT_TOL = 1e-8
# relative least-squares residual ceiling for the stacked accel system
ACCEL_RESID_TOL = 1e-10


@dataclass(frozen=True)
class State:
    """Instantaneous state (t, z, v) of the system."""

    z: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "z", as_point(self.z))
        object.__setattr__(self, "v", as_point(self.v, self.z.shape[0]))
        object.__setattr__(self, "t", float(self.t))


@dataclass(frozen=True)
class Trajectory:
    """Uniform-step trajectory with per-sample diagnostics.

    Attributes
    ----------
    t : ndarray
        (k,) sample times, strictly increasing, spaced by ``step``.
    z, v : ndarray
        (k, n) positions and velocities; row 0 is the initial state.
    energy : ndarray
        (k,) total energy (1/2) v^T g v + V per sample.
    constraint_residual : ndarray
        (k, m) signed residual A v + B per sample.
    step : float
        Step size h.
    backend : str
        Kernel backend that produced the samples.
    """

    t: np.ndarray
    z: np.ndarray
    v: np.ndarray
    energy: np.ndarray
    constraint_residual: np.ndarray
    step: float
    backend: str = "numpy"

    def __len__(self) -> int:
        return self.t.shape[0]

    def state(self, i: int) -> State:
        return State(z=self.z[i], v=self.v[i], t=float(self.t[i]))

    @property
    def final(self) -> State:
        return self.state(len(self) - 1)


@dataclass(frozen=True)
class LagrangianSystem:
    """Mechanical system: metric, potential and Pfaffian constraints."""

    metric: MetricField
    potential: ScalarField
    pfaffian: PfaffianSystem
    callbacks: FieldCallbacks | None = None

    @property
    def n(self) -> int:
        return self.metric.dim

    @property
    def m(self) -> int:
        return self.pfaffian.m

    @classmethod
    def from_callbacks(
        cls,
        n: int,
        m: int,
        metric,
        potential,
        constraint,
        constraint_rhs=None,
        jit: bool = False,
    ) -> "LagrangianSystem":
        """Build a system from raw array-in/array-out callables.

        The same callables back both the rich field objects and the
        integration kernel; ``jit=True`` marks them numba-compilable.
        """
        if constraint_rhs is None:
            def constraint_rhs(t):
                return np.zeros(m)

        cb = FieldCallbacks(
            n=n,
            m=m,
            metric=metric,
            potential=potential,
            constraint=constraint,
            constraint_rhs=constraint_rhs,
            jit=jit,
        )
        return cls(
            metric=MetricField(dim=n, eval=metric),
            potential=ScalarField(dim=n, eval=potential),
            pfaffian=PfaffianSystem(dim=n, m=m, eval=constraint, rhs=constraint_rhs),
            callbacks=cb,
        )

    def projector_pair(self, z) -> ProjectorPair:
        """Metric-orthogonal pair at z (CONSTRAINT_TANGENTIAL)."""
        return orthogonal_pair(self.metric, self.pfaffian, z)


def _velocity_quadratic(dg: np.ndarray, v: np.ndarray) -> np.ndarray:
    """(dg_IJ/dz^K - (1/2) dg_JK/dz^I) v^J v^K."""
    return np.einsum("ijk,j,k->i", dg, v, v) - 0.5 * np.einsum("jki,j,k->i", dg, v, v)


def el_residual(system: LagrangianSystem, z, v, a) -> np.ndarray:
    """Euler-Lagrange covector E_I = g_IJ a^J + h_I at (z, v, a)."""
    z = as_point(z, system.n)
    v = as_point(v, system.n)
    a = as_point(a, system.n)
    g = system.metric(z)
    dg = system.metric.jacobian_at(z)
    grad_v = system.potential.gradient_at(z)
    return g @ a + _velocity_quadratic(dg, v) + grad_v


def energy(system: LagrangianSystem, z, v) -> float:
    """Total energy (1/2) v^T g(z) v + V(z)."""
    z = as_point(z, system.n)
    v = as_point(v, system.n)
    g = system.metric(z)
    return 0.5 * float(v @ g @ v) + system.potential(z)


def constrained_accel(system: LagrangianSystem, state: State) -> np.ndarray:
    """Acceleration of the projected dynamics at a state.

    Solves the stacked full-rank system

        P (a + g^{-1} h) = 0,
        A a = -(dA/dt) v - dB/dt,

    by least squares. At the solution the raised Euler-Lagrange
    covector satisfies g^{-1}E = Q g^{-1}E to 1e-10.

    Raises
    ------
    SingularMetric, DegenerateConstraints
        From the projector construction.
    IllPosedDynamics
        If the least-squares residual exceeds 1e-10 relative to the
        right-hand side.
    """
    z, v, t = state.z, state.v, state.t
    n = system.n
    g = system.metric(z)
    pair = orthogonal_pair(g, system.pfaffian.matrix_at(z), z)
    ginv = metric_inverse(g)
    dg = system.metric.jacobian_at(z)
    grad_v = system.potential.gradient_at(z)
    hcov = _velocity_quadratic(dg, v) + grad_v

    if system.m == 0:
        return -(ginv @ hcov)

    amat = system.pfaffian.matrix_at(z)
    da = system.pfaffian.jacobian_at(z)
    adot = np.einsum("ijk,k->ij", da, v)
    bdot = system.pfaffian.rhs_dot_at(t)

    stacked = np.vstack([pair.p, amat])
    rhs = np.concatenate([-(pair.p @ (ginv @ hcov)), -(adot @ v) - bdot])
    sol, _, _, _ = np.linalg.lstsq(stacked, rhs, rcond=1e-14)
    resid = np.linalg.norm(stacked @ sol - rhs)
    if resid > ACCEL_RESID_TOL * max(1.0, np.linalg.norm(rhs)):
        raise IllPosedDynamics(
            f"stacked projected system has residual {resid:.3e} at t={t!r}"
        )
    return sol


def project_initial_velocity(system: LagrangianSystem, z, v, t: float = 0.0) -> np.ndarray:
    """Project a velocity onto the admissible affine space A v + B = 0.

    Returns P v + v_B with v_B the minimum-norm solution of A v_B = -B.
    """
    z = as_point(z, system.n)
    v = as_point(v, system.n)
    if system.m == 0:
        return v.copy()
    pair = system.projector_pair(z)
    out = pair.p @ v
    b = system.pfaffian.rhs_at(t)
    if np.any(b != 0.0):
        amat = system.pfaffian.matrix_at(z)
        vb, _, _, _ = np.linalg.lstsq(amat, -b, rcond=1e-14)
        out = out + vb
    return out


@lru_cache(maxsize=64)
def _fallback_callbacks(system: LagrangianSystem) -> FieldCallbacks:
    n, m = system.n, system.m
    metric_eval = system.metric.eval
    pot_eval = system.potential.eval
    con_eval = system.pfaffian.eval
    rhs = system.pfaffian.rhs

    def metric_cb(z):
        return np.asarray(metric_eval(z), dtype=float)

    def potential_cb(z):
        return float(pot_eval(z))

    def constraint_cb(z):
        return np.asarray(con_eval(z), dtype=float).reshape(m, n)

    if rhs is None:
        def rhs_cb(t):
            return np.zeros(m)
    else:
        def rhs_cb(t):
            return np.asarray(rhs(t), dtype=float).reshape(m)

    return FieldCallbacks(
        n=n, m=m,
        metric=metric_cb, potential=potential_cb,
        constraint=constraint_cb, constraint_rhs=rhs_cb,
        jit=False,
    )


_STATUS_MESSAGES = {
    kernels.STATUS_NONFINITE_STATE: "state became non-finite",
    kernels.STATUS_ILL_POSED: "stacked projected system lost rank (least-squares residual above 1e-10)",
    kernels.STATUS_DEGENERATE: "constraint rows became degenerate",
    kernels.STATUS_SINGULAR_METRIC: "metric became singular (condition estimate above 1e12)",
    kernels.STATUS_BAD_FIELD: "a field evaluated to a non-finite value",
}


def integrate(
    system: LagrangianSystem,
    initial: State,
    t_end: float,
    h: float,
    backend: str | None = None,
) -> Trajectory:
    """Integrate the projected dynamics from ``initial`` to ``t_end``.

    Classical RK4 with uniform step ``h``; after every step the
    velocity is projected back onto the constraint. Samples (with
    energy and constraint-residual diagnostics) are recorded at every
    step, row 0 being the initial state.

    Parameters
    ----------
    backend : str, optional
        ``"numba"`` or ``"numpy"``; default follows the
        PROJMECH_BACKEND environment flag, then numba availability.

    Raises
    ------
    ValueError
        If the initial velocity violates A v + B = 0 beyond 1e-8
        (project it first, e.g. with ``project_initial_velocity``), or
        if the time grid is empty.
    IntegrationFailure
        If a step produces a non-finite state or an unsolvable
        projected system; carries the partial trajectory.
    DegenerateConstraints, SingularMetric, DifferentiationFailure
        If the geometry degenerates mid-run.
    """
    if not isinstance(initial, State):
        raise TypeError("initial must be a State")
    z0, v0, t0 = initial.z, initial.v, initial.t
    if z0.shape[0] != system.n:
        raise ValueError(f"state dimension {z0.shape[0]} does not match system ({system.n})")
    if h <= 0:
        raise ValueError("step size must be positive")
    nsteps = int(round((t_end - t0) / h))
    if nsteps < 1:
        raise ValueError(f"empty time grid: t_end={t_end!r}, t0={t0!r}, h={h!r}")

    # precise SVD-based geometry checks at the start point
    system.metric.validate_at(z0)
    system.projector_pair(z0)
    resid0 = system.pfaffian.residual(z0, v0, t0)
    if resid0.size and np.abs(resid0).max() > CONSTRAINT_TOL:
        raise ValueError(
            f"initial velocity violates the constraint (max |A v + B| = "
            f"{np.abs(resid0).max():.3e} > {CONSTRAINT_TOL:.0e}); project it onto "
            "the constraint first (project_initial_velocity, or --project-init in the CLI)"
        )

    cb = system.callbacks if system.callbacks is not None else _fallback_callbacks(system)
    run, chosen = build_stepper(cb, backend)
    ts, zs, vs, es, rs, count, status = run(z0, v0, t0, float(h), nsteps)

    traj = Trajectory(
        t=ts[:count],
        z=zs[:count],
        v=vs[:count],
        energy=es[:count],
        constraint_residual=rs[:count],
        step=float(h),
        backend=chosen,
    )
    if status == kernels.STATUS_OK:
        return traj

    t_fail = t0 + count * h
    msg = _STATUS_MESSAGES.get(status, "unknown failure")
    detail = f"{msg} near t = {t_fail:.6g} (completed {count - 1} of {nsteps} steps)"
    if status in (kernels.STATUS_NONFINITE_STATE, kernels.STATUS_ILL_POSED):
        raise IntegrationFailure(detail, trajectory=traj)
    if status == kernels.STATUS_DEGENERATE:
        raise DegenerateConstraints(detail)
    if status == kernels.STATUS_SINGULAR_METRIC:
        raise SingularMetric(detail)
    raise DifferentiationFailure(detail)
