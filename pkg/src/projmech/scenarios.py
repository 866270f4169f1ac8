"""Built-in constrained scenarios and their reduced-equation oracles.

Two classical systems exercise the whole pipeline:

* ``sleigh`` - a knife-edge sled on the plane. Chart (x, y, theta),
  kinetic metric diag(1, 1, J), no potential, and one constraint: the
  contact point at distance r behind the blade cannot slip sideways,
  -sin(theta) xdot + cos(theta) ydot - r thetadot = 0. In body
  variables u (forward speed) and omega = thetadot the motion obeys
  udot = r omega^2, omegadot = -(r/(J + r^2)) u omega, and the reduced
  energy u^2 + (J + r^2) omega^2 is conserved.

* ``heisenberg`` - a free unit-mass particle in R^3 subject to
  zdot = y xdot (coefficient rows (-y, 0, 1)). The admissible frame
  X1 = d/dx + y d/dz, X2 = d/dy closes onto d/dz under the Lie
  bracket, so the constraint is maximally nonintegrable. The motion
  satisfies xddot = -(y/(1+y^2)) xdot ydot, yddot = 0, zdot = y xdot.

The reduced oracles integrate these closed-form equations with a
self-contained scalar RK4 (same tableau as the main integrator, no
shared code) so full-pipeline trajectories can be validated against an
independent path.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .dynamics import LagrangianSystem, State
from .projectors import ObliqueFrame

__all__ = [
    "chaplygin_sleigh",
    "sleigh_initial_state",
    "sleigh_body_velocities",
    "sleigh_reduced_oracle",
    "sleigh_transverse_projector",
    "heisenberg_particle",
    "heisenberg_initial_state",
    "heisenberg_reduced_oracle",
    "heisenberg_transverse_projector",
    "heisenberg_tangential_projector",
    "heisenberg_metric_q",
    "heisenberg_similarity",
    "heisenberg_oblique_frame",
    "ScenarioSpec",
    "SCENARIOS",
]


# ---------------------------------------------------------------------------
# Chaplygin sleigh


@lru_cache(maxsize=None)
def _sleigh_callbacks(r: float, J: float):
    def metric(z):
        g = np.zeros((3, 3))
        g[0, 0] = 1.0
        g[1, 1] = 1.0
        g[2, 2] = J
        return g

    def potential(z):
        return 0.0

    def constraint(z):
        return np.array(((-np.sin(z[2]), np.cos(z[2]), -r),))

    def constraint_rhs(t):
        return np.zeros(1)

    return metric, potential, constraint, constraint_rhs


@lru_cache(maxsize=None)
def _sleigh_system(r: float, J: float) -> LagrangianSystem:
    mk = _sleigh_callbacks(r, J)
    return LagrangianSystem.from_callbacks(3, 1, *mk, jit=True)


def chaplygin_sleigh(r: float, J: float) -> LagrangianSystem:
    """Knife-edge sled: chart (x, y, theta), metric diag(1, 1, J).

    Systems are cached per parameter pair so the compiled kernel is
    shared by every instance with the same (r, J).

    Parameters
    ----------
    r : float
        Distance from the contact point to the blade axis.
    J : float
        Moment of inertia about the contact point.
    """
    if J <= 0:
        raise ValueError("sleigh inertia J must be positive")
    return _sleigh_system(float(r), float(J))


def sleigh_initial_state(
    r: float,
    theta: float = 0.0,
    u: float = 0.0,
    omega: float = 0.0,
    x: float = 0.0,
    y: float = 0.0,
    t: float = 0.0,
) -> State:
    """Lift body velocities (u, omega) to an on-constraint full state.

    The no-slip condition fixes the lab-frame transverse speed at
    r*omega, so xdot = u cos(theta) - r omega sin(theta) and
    ydot = u sin(theta) + r omega cos(theta).
    """
    s, c = np.sin(theta), np.cos(theta)
    v = np.array([u * c - r * omega * s, u * s + r * omega * c, omega])
    return State(z=np.array([x, y, theta]), v=v, t=t)


def sleigh_body_velocities(traj_z: np.ndarray, traj_v: np.ndarray):
    """Extract (u, w, omega) along a sleigh trajectory.

    u is the forward speed, w the lab transverse speed of the contact
    point (equal to r*omega on the constraint), omega the turning rate.
    """
    theta = traj_z[..., 2]
    s, c = np.sin(theta), np.cos(theta)
    u = traj_v[..., 0] * c + traj_v[..., 1] * s
    w = traj_v[..., 1] * c - traj_v[..., 0] * s
    return u, w, traj_v[..., 2]


def sleigh_reduced_oracle(u0: float, omega0: float, r: float, J: float, t_end: float, h: float):
    """RK4 on the body equations udot = r w^2, wdot = -(r/(J+r^2)) u w.

    Returns (t, u, omega) arrays sampled every step, row 0 the initial
    values. Self-contained scalar arithmetic; shares no code with the
    integrator kernels.
    """
    nsteps = int(round(t_end / h))
    coef = r / (J + r * r)

    def du(u, w):
        return r * w * w

    def dw(u, w):
        return -coef * u * w

    ts = [0.0]
    us = [float(u0)]
    ws = [float(omega0)]
    u, w = float(u0), float(omega0)
    for k in range(nsteps):
        k1u, k1w = du(u, w), dw(u, w)
        k2u, k2w = du(u + 0.5 * h * k1u, w + 0.5 * h * k1w), dw(u + 0.5 * h * k1u, w + 0.5 * h * k1w)
        k3u, k3w = du(u + 0.5 * h * k2u, w + 0.5 * h * k2w), dw(u + 0.5 * h * k2u, w + 0.5 * h * k2w)
        k4u, k4w = du(u + h * k3u, w + h * k3w), dw(u + h * k3u, w + h * k3w)
        u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
        w = w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        ts.append((k + 1) * h)
        us.append(u)
        ws.append(w)
    return np.array(ts), np.array(us), np.array(ws)


def sleigh_transverse_projector(theta: float, r: float, J: float) -> np.ndarray:
    """Closed-form transverse projector Q of the sleigh at heading theta."""
    s, c = np.sin(theta), np.cos(theta)
    front = J / (J + r * r)
    return front * np.array(
        [
            [s * s, -c * s, r * s],
            [-c * s, c * c, -r * c],
            [r * s / J, -r * c / J, r * r / J],
        ]
    )


# ---------------------------------------------------------------------------
# Heisenberg particle


@lru_cache(maxsize=None)
def _heisenberg_callbacks():
    def metric(z):
        return np.eye(3)

    def potential(z):
        return 0.0

    def constraint(z):
        return np.array(((-z[1], 0.0, 1.0),))

    def constraint_rhs(t):
        return np.zeros(1)

    return metric, potential, constraint, constraint_rhs


@lru_cache(maxsize=None)
def heisenberg_particle() -> LagrangianSystem:
    """Free unit-mass particle in R^3 constrained by zdot = y xdot."""
    mk = _heisenberg_callbacks()
    return LagrangianSystem.from_callbacks(3, 1, *mk, jit=True)


def heisenberg_initial_state(
    x: float = 0.0,
    y: float = 0.0,
    z: float = 0.0,
    vx: float = 0.0,
    vy: float = 0.0,
    vz: float | None = None,
    t: float = 0.0,
) -> State:
    """Full state; vz defaults to the on-constraint value y*vx."""
    if vz is None:
        vz = y * vx
    return State(z=np.array([x, y, z]), v=np.array([vx, vy, vz]), t=t)


def heisenberg_reduced_oracle(
    x0: float, y0: float, z0: float, vx0: float, vy0: float, t_end: float, h: float
):
    """RK4 on xddot = -(y/(1+y^2)) xdot ydot, yddot = 0, zdot = y xdot.

    Returns (t, pos (k,3), vel (k,3)) with vz reconstructed as y*xdot.
    Self-contained scalar arithmetic, independent of the kernels.
    """
    nsteps = int(round(t_end / h))

    def rhs(state):
        x, y, z, vx, vy = state
        ax = -(y / (1.0 + y * y)) * vx * vy
        return (vx, vy, y * vx, ax, 0.0)

    state = (float(x0), float(y0), float(z0), float(vx0), float(vy0))
    ts = [0.0]
    rows = [state]
    for k in range(nsteps):
        k1 = rhs(state)
        s2 = tuple(state[i] + 0.5 * h * k1[i] for i in range(5))
        k2 = rhs(s2)
        s3 = tuple(state[i] + 0.5 * h * k2[i] for i in range(5))
        k3 = rhs(s3)
        s4 = tuple(state[i] + h * k3[i] for i in range(5))
        k4 = rhs(s4)
        state = tuple(
            state[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(5)
        )
        ts.append((k + 1) * h)
        rows.append(state)
    arr = np.array(rows)
    pos = arr[:, :3]
    vel = np.column_stack([arr[:, 3], arr[:, 4], arr[:, 1] * arr[:, 3]])
    return np.array(ts), pos, vel


def heisenberg_transverse_projector(y: float) -> np.ndarray:
    """Closed-form transverse projector Q of the Heisenberg particle."""
    d = 1.0 + y * y
    return np.array([[y * y, 0.0, -y], [0.0, 0.0, 0.0], [-y, 0.0, 1.0]]) / d


def heisenberg_tangential_projector(y: float) -> np.ndarray:
    """Closed-form admissible projector P = I - Q."""
    d = 1.0 + y * y
    return np.array([[1.0, 0.0, y], [0.0, d, 0.0], [y, 0.0, y * y]]) / d


def heisenberg_metric_q(y: float) -> np.ndarray:
    """Oblique transverse projector q in the split chart (x, y | z)."""
    return np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [-y, 0.0, 1.0]])


def heisenberg_similarity(y: float) -> np.ndarray:
    """Change of frame U with Q = U q U^{-1}."""
    return np.array([[1.0 + y * y, 0.0, -y], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def heisenberg_oblique_frame(y: float) -> ObliqueFrame:
    """Oblique frame of the split (x, y | z): w = dz - y dx."""
    return ObliqueFrame(gamma=np.array([[-y, 0.0]]))


# ---------------------------------------------------------------------------
# Scenario registry (used by the CLI)


@dataclass(frozen=True)
class ScenarioSpec:
    """CLI-facing description of a built-in scenario."""

    name: str
    param_names: tuple[str, ...]
    param_defaults: dict
    init_keys: tuple[str, ...]
    build: Callable[..., LagrangianSystem]
    initial: Callable[[dict, dict], State]


def _sleigh_initial(params: dict, init: dict) -> State:
    return sleigh_initial_state(
        r=params["r"],
        theta=init.get("theta", 0.0),
        u=init.get("u", 0.0),
        omega=init.get("omega", 0.0),
        x=init.get("x", 0.0),
        y=init.get("y", 0.0),
    )


def _heisenberg_initial(params: dict, init: dict) -> State:
    if "v" in init:
        vx, vy, vz = init["v"]
    else:
        vx = init.get("vx", 0.0)
        vy = init.get("vy", 0.0)
        vz = init.get("vz", None)
    return heisenberg_initial_state(
        x=init.get("x", 0.0),
        y=init.get("y", 0.0),
        z=init.get("z", 0.0),
        vx=vx,
        vy=vy,
        vz=vz,
    )


SCENARIOS = {
    "sleigh": ScenarioSpec(
        name="sleigh",
        param_names=("r", "J"),
        param_defaults={"r": 1.0, "J": 2.0},
        init_keys=("x", "y", "theta", "u", "omega"),
        build=lambda params: chaplygin_sleigh(r=params["r"], J=params["J"]),
        initial=_sleigh_initial,
    ),
    "heisenberg": ScenarioSpec(
        name="heisenberg",
        param_names=(),
        param_defaults={},
        init_keys=("x", "y", "z", "vx", "vy", "vz", "v"),
        build=lambda params: heisenberg_particle(),
        initial=_heisenberg_initial,
    ),
}
