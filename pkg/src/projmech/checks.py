"""Reusable invariant suites over projectors, dynamics and brackets.

Every suite returns a list of :class:`CheckResult` records (name, worst
violation, tolerance, verdict), so the same code backs the ``check``
CLI subcommand and the acceptance tests. Informational records report a
quantity without enforcing a bound (``info=True``; they never fail).

Randomized suites draw from a seeded generator and guard their samples:
metrics are SPD with eigenvalues in [0.3, 3] and constraint rows are
resampled until their singular-value ratio is at least 1e-2, keeping
conditioning-driven roundoff well below the 1e-10 identity tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import State, Trajectory, integrate
from .poisson import (
    PoissonField,
    SecondClassConstraintSet,
    bracket,
    canonical_poisson,
    coordinate_field,
    dirac_bracket,
    jacobiator,
    pseudo_poisson,
    pseudo_poisson_field,
    transverse_decomposition,
)
from .projectors import ProjectorPair, adapted_metric, oblique_pair, orthogonal_pair
from .scenarios import (
    chaplygin_sleigh,
    heisenberg_initial_state,
    heisenberg_metric_q,
    heisenberg_oblique_frame,
    heisenberg_particle,
    heisenberg_reduced_oracle,
    heisenberg_similarity,
    heisenberg_tangential_projector,
    heisenberg_transverse_projector,
    sleigh_body_velocities,
    sleigh_initial_state,
    sleigh_reduced_oracle,
    sleigh_transverse_projector,
)

__all__ = [
    "CheckResult",
    "projector_identity_violation",
    "projector_fuzz",
    "scenario_matrix_checks",
    "sleigh_reduced_violation",
    "heisenberg_reduced_violation",
    "velocity_component_drift",
    "energy_drift",
    "max_constraint_residual",
    "trajectory_suite",
    "dirac_suite",
    "pseudo_suite",
    "backend_equivalence",
    "rk4_order_estimate",
    "run_all",
]

PROJECTOR_TOL = 1e-10
MATRIX_TOL = 1e-12
REDUCED_TOL = 1e-6
ENERGY_TOL = 1e-7
RESIDUAL_TOL = 1e-8
CENTRALITY_TOL = 1e-10
EXTENSION_TOL = 1e-8
JACOBI_TOL = 2e-5
BACKEND_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    """One invariant verdict: worst violation against a tolerance."""

    name: str
    violation: float
    tol: float
    passed: bool
    info: bool = False
    detail: str = ""


def _record(name: str, violation: float, tol: float, detail: str = "") -> CheckResult:
    violation = float(violation)
    return CheckResult(
        name=name, violation=violation, tol=float(tol),
        passed=bool(violation <= tol), detail=detail,
    )


def _info(name: str, value: float, detail: str = "") -> CheckResult:
    return CheckResult(
        name=name, violation=float(value), tol=math.inf,
        passed=True, info=True, detail=detail,
    )


# ---------------------------------------------------------------------------
# projector algebra


def projector_identity_violation(pair: ProjectorPair) -> float:
    """Worst violation of the defining projector-pair identities.

    Checks idempotency of both factors, complementarity P + Q = I,
    mutual annihilation PQ = QP = 0 and the involution property of
    Q - P.
    """
    p, q = pair.p, pair.q
    eye = np.eye(pair.dim)
    aps = pair.aps
    return max(
        float(np.abs(p @ p - p).max()),
        float(np.abs(q @ q - q).max()),
        float(np.abs(p + q - eye).max()),
        float(np.abs(p @ q).max()),
        float(np.abs(q @ p).max()),
        float(np.abs(aps @ aps - eye).max()),
    )


def _random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = rng.uniform(0.3, 3.0, size=n)
    g = (basis * eig) @ basis.T
    return 0.5 * (g + g.T)


def _random_constraints(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    # resample until comfortably full-rank so conditioning stays benign
    for _ in range(200):
        a = rng.standard_normal((m, n))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] >= 1e-2 * sv[0]:
            return a
    raise RuntimeError("failed to sample a well-conditioned constraint matrix")


def projector_fuzz(trials: int = 1000, seed: int = 2024, max_dim: int = 8) -> list[CheckResult]:
    """Randomized projector-pair invariants in dimensions 2..max_dim."""
    rng = np.random.default_rng(seed)
    worst_orth = worst_rank = worst_ann = worst_adj = 0.0
    worst_obl = worst_rec = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, max_dim + 1))
        m = int(rng.integers(1, n))
        g = _random_spd(rng, n)
        a = _random_constraints(rng, n, m)
        z = rng.standard_normal(n)

        pair = orthogonal_pair(g, a, z)
        worst_orth = max(worst_orth, projector_identity_violation(pair))
        worst_ann = max(worst_ann, float(np.abs(a @ pair.p).max()))
        # an idempotent matrix has trace equal to its rank
        worst_rank = max(worst_rank, abs(float(np.trace(pair.q)) - m))
        gq = g @ pair.q
        worst_adj = max(worst_adj, float(np.abs(gq - gq.T).max()))

        gamma = rng.standard_normal((m, n - m))
        opair = oblique_pair(gamma)
        worst_obl = max(worst_obl, projector_identity_violation(opair))
        blocks = adapted_metric(g, gamma)
        worst_rec = max(worst_rec, float(np.abs(blocks.reconstruct() - g).max()))
    detail = f"{trials} trials, dim <= {max_dim}, seed {seed}"
    return [
        _record("orthogonal-pair-identities", worst_orth, PROJECTOR_TOL, detail),
        _record("constraint-annihilation", worst_ann, PROJECTOR_TOL, detail),
        _record("transverse-rank", worst_rank, PROJECTOR_TOL, detail),
        _record("metric-self-adjointness", worst_adj, PROJECTOR_TOL, detail),
        _record("oblique-pair-identities", worst_obl, PROJECTOR_TOL, detail),
        _record("adapted-metric-reconstruction", worst_rec, PROJECTOR_TOL, detail),
    ]


def scenario_matrix_checks(points: int = 100, seed: int = 7) -> list[CheckResult]:
    """Built-in scenario projectors against their closed forms."""
    rng = np.random.default_rng(seed)
    worst_sleigh = worst_heis = worst_oblique = worst_sim = 0.0
    sleigh = chaplygin_sleigh(r=1.0, J=2.0)
    heis = heisenberg_particle()
    for _ in range(points):
        theta = float(rng.uniform(-np.pi, np.pi))
        z = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), theta])
        pair = sleigh.projector_pair(z)
        worst_sleigh = max(
            worst_sleigh,
            float(np.abs(pair.q - sleigh_transverse_projector(theta, 1.0, 2.0)).max()),
        )

        y = float(rng.uniform(-2, 2))
        zh = np.array([rng.uniform(-1, 1), y, rng.uniform(-1, 1)])
        hpair = heis.projector_pair(zh)
        worst_heis = max(
            worst_heis,
            float(np.abs(hpair.q - heisenberg_transverse_projector(y)).max()),
            float(np.abs(hpair.p - heisenberg_tangential_projector(y)).max()),
        )
        opair = oblique_pair(heisenberg_oblique_frame(y), point=zh)
        worst_oblique = max(
            worst_oblique, float(np.abs(opair.q - heisenberg_metric_q(y)).max())
        )
        u = heisenberg_similarity(y)
        conjugated = u @ opair.q @ np.linalg.inv(u)
        worst_sim = max(worst_sim, float(np.abs(conjugated - hpair.q).max()))
    detail = f"{points} random points, seed {seed}"
    return [
        _record("sleigh-projector-closed-form", worst_sleigh, MATRIX_TOL, detail),
        _record("heisenberg-projector-closed-form", worst_heis, MATRIX_TOL, detail),
        _record("heisenberg-oblique-closed-form", worst_oblique, MATRIX_TOL, detail),
        _record("heisenberg-oblique-similarity", worst_sim, MATRIX_TOL, detail),
    ]


# ---------------------------------------------------------------------------
# trajectory invariants


def sleigh_reduced_violation(traj: Trajectory, r: float, J: float) -> float:
    """Worst body-velocity deviation from the reduced-equation oracle."""
    u, _, omega = sleigh_body_velocities(traj.z, traj.v)
    t_end = float(traj.t[-1] - traj.t[0])
    _, u_ref, w_ref = sleigh_reduced_oracle(u[0], omega[0], r, J, t_end, traj.step)
    return max(float(np.abs(u - u_ref).max()), float(np.abs(omega - w_ref).max()))


def heisenberg_reduced_violation(traj: Trajectory) -> float:
    """Worst position/velocity deviation from the reduced-equation oracle."""
    x0, y0, z0 = traj.z[0]
    vx0, vy0 = traj.v[0, 0], traj.v[0, 1]
    t_end = float(traj.t[-1] - traj.t[0])
    _, pos, vel = heisenberg_reduced_oracle(x0, y0, z0, vx0, vy0, t_end, traj.step)
    return max(float(np.abs(traj.z - pos).max()), float(np.abs(traj.v - vel).max()))


def velocity_component_drift(traj: Trajectory, index: int) -> float:
    """Max drift of one velocity component from its initial value."""
    return float(np.abs(traj.v[:, index] - traj.v[0, index]).max())


def energy_drift(traj: Trajectory) -> float:
    return float(np.abs(traj.energy - traj.energy[0]).max())


def max_constraint_residual(traj: Trajectory) -> float:
    if traj.constraint_residual.size == 0:
        return 0.0
    return float(np.abs(traj.constraint_residual).max())


def trajectory_suite(traj: Trajectory, label: str) -> list[CheckResult]:
    """Energy conservation and constraint drift of one trajectory."""
    detail = f"{label}, {len(traj) - 1} steps of {traj.step:g}, backend {traj.backend}"
    return [
        _record(f"{label}-energy-conservation", energy_drift(traj), ENERGY_TOL, detail),
        _record(f"{label}-constraint-drift", max_constraint_residual(traj), RESIDUAL_TOL, detail),
    ]


def backend_equivalence(t_end: float = 1.0, h: float = 1e-3) -> list[CheckResult]:
    """Agreement of the compiled and fallback integrators on the sleigh."""
    from .kernels import HAVE_NUMBA

    if not HAVE_NUMBA:
        return [
            _info("backend-agreement", 0.0, "numba unavailable; single-backend run")
        ]
    system = chaplygin_sleigh(r=1.0, J=2.0)
    init = sleigh_initial_state(r=1.0, theta=0.3, u=1.0, omega=0.7)
    fast = integrate(system, init, t_end=t_end, h=h, backend="numba")
    slow = integrate(system, init, t_end=t_end, h=h, backend="numpy")
    viol = max(
        float(np.abs(fast.z - slow.z).max()),
        float(np.abs(fast.v - slow.v).max()),
    )
    return [
        _record("backend-agreement", viol, BACKEND_TOL, f"{len(fast) - 1} steps of {h:g}")
    ]


def rk4_order_estimate(
    t_end: float = 2.0,
    steps: tuple[float, ...] = (4e-2, 2e-2, 1e-2),
    backend: str | None = None,
) -> float:
    """Observed convergence order of the integrator on the sleigh.

    Errors are measured against the reduced-equation oracle run at a
    much finer step, and successive step halvings give the order as a
    base-2 logarithm of the error ratio. Classical RK4 with post-step
    projection should report an order close to 4.
    """
    r, J, u0, w0 = 1.0, 2.0, 1.0, 1.0
    system = chaplygin_sleigh(r=r, J=J)
    _, u_ref, w_ref = sleigh_reduced_oracle(u0, w0, r, J, t_end, 1e-5)
    ref = np.array([u_ref[-1], w_ref[-1]])
    errs = []
    for h in steps:
        traj = integrate(
            system, sleigh_initial_state(r=r, u=u0, omega=w0), t_end=t_end, h=h,
            backend=backend,
        )
        u, _, omega = sleigh_body_velocities(traj.z[-1], traj.v[-1])
        errs.append(float(np.hypot(u - ref[0], omega - ref[1])))
    orders = [
        np.log(errs[i] / errs[i + 1]) / np.log(steps[i] / steps[i + 1])
        for i in range(len(errs) - 1)
    ]
    return float(np.mean(orders))


# ---------------------------------------------------------------------------
# bracket suites


def _canonical_setup():
    # chart (q1, p1, q2, p2); constraints remove the second pair
    pi = canonical_poisson(2)
    cons = SecondClassConstraintSet.from_coordinates(4, (2, 3))
    z = np.array([0.3, -0.7, 0.0, 0.0])
    return pi, cons, z


def dirac_suite() -> list[CheckResult]:
    """Dirac-bracket invariants on the canonical two-pair chart."""
    pi, cons, z = _canonical_setup()
    records = []

    # constraint scalars are central for the reduced bracket
    probes = [coordinate_field(4, i) for i in range(4)]
    probes.append(lambda p: p[0] ** 2 + np.sin(p[1]) + p[2] * p[3])
    worst = 0.0
    for xa in cons.functions:
        for f in probes:
            worst = max(worst, abs(dirac_bracket(pi, cons, xa, f, z)))
            worst = max(worst, abs(dirac_bracket(pi, cons, f, xa, z)))
    records.append(_record("dirac-centrality", worst, CENTRALITY_TOL))

    # off-locus extensions do not change the bracket on the locus
    def f_plain(p):
        return p[0] ** 2 + np.sin(p[1])

    def f_extended(p):
        return p[0] ** 2 + np.sin(p[1]) + p[2] * (1.0 + p[0] * p[1]) + p[3] * np.cos(p[0])

    def g_plain(p):
        return p[0] * p[1]

    def g_extended(p):
        return p[0] * p[1] + p[3] * p[3] * p[0] - 2.0 * p[2] * np.sin(p[3])

    worst = max(
        abs(dirac_bracket(pi, cons, f_plain, g_plain, z)
            - dirac_bracket(pi, cons, f_extended, g_plain, z)),
        abs(dirac_bracket(pi, cons, f_plain, g_plain, z)
            - dirac_bracket(pi, cons, f_plain, g_extended, z)),
        abs(dirac_bracket(pi, cons, f_plain, g_plain, z)
            - dirac_bracket(pi, cons, f_extended, g_extended, z)),
    )
    records.append(_record("dirac-extension-independence", worst, EXTENSION_TOL))

    # the Dirac bracket of a constant tensor still satisfies Jacobi
    def dbr(f, g, zz):
        return dirac_bracket(pi, cons, f, g, zz)

    def h_fn(p):
        return p[1] ** 2 * p[0] + p[3]

    worst = max(
        abs(jacobiator(dbr, f_plain, g_plain, h_fn, z)),
        abs(jacobiator(dbr, coordinate_field(4, 0), coordinate_field(4, 1), h_fn, z)),
    )
    records.append(_record("dirac-jacobi", worst, JACOBI_TOL))

    # splitting: transverse part + reduced part recover the tensor
    dec = transverse_decomposition(pi, cons, z)
    split = float(np.abs(dec.pi_w - (dec.pi_s + dec.pi_m)).max())
    records.append(_record("poisson-split-exact", split, 1e-15))

    s_expected = np.zeros((4, 4))
    s_expected[2, 3] = 1.0
    s_expected[3, 2] = -1.0
    m_expected = np.zeros((4, 4))
    m_expected[0, 1] = 1.0
    m_expected[1, 0] = -1.0
    frozen = max(
        float(np.abs(dec.pi_s - s_expected).max()),
        float(np.abs(dec.pi_m - m_expected).max()),
    )
    records.append(_record("poisson-split-frozen", frozen, MATRIX_TOL))

    # the reduced tensor annihilates every constraint gradient
    grads = cons.gradients_at(z)
    ann = float(np.abs(dec.pi_m @ grads.T).max())
    records.append(_record("dirac-annihilation", ann, CENTRALITY_TOL))
    return records


def _heisenberg_pseudo_block(z: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Closed-form momentum-momentum block of the pseudo tensor."""
    y = z[1]
    s = 1.0 + y * y
    c0 = (-2.0 * y * p[0] + (1.0 - y * y) * p[2]) / (s * s)
    c2 = ((1.0 - y * y) * p[0] + 2.0 * y * p[2]) / (s * s)
    d = np.zeros((3, 3))
    d[0, 1] = c0
    d[1, 0] = -c0
    d[2, 1] = c2
    d[1, 2] = -c2
    return d


def pseudo_suite(trials: int = 25, seed: int = 11) -> list[CheckResult]:
    """Pseudo-Poisson tensor invariants for the particle projector field."""
    rng = np.random.default_rng(seed)

    def p_field(z):
        return heisenberg_tangential_projector(z[1])

    records = []
    worst_skew = worst_closed = 0.0
    for _ in range(trials):
        z = rng.uniform(-1.5, 1.5, size=3)
        p = rng.uniform(-2.0, 2.0, size=3)
        ps = pseudo_poisson(p_field, z, p)
        worst_skew = max(worst_skew, float(np.abs(ps + ps.T).max()))
        worst_closed = max(
            worst_closed,
            float(np.abs(ps[3:, 3:] - _heisenberg_pseudo_block(z, p)).max()),
        )
    detail = f"{trials} random phase points, seed {seed}"
    records.append(_record("pseudo-skew", worst_skew, CENTRALITY_TOL, detail))
    records.append(_record("pseudo-closed-form", worst_closed, EXTENSION_TOL, detail))

    # constant projector fields carry no momentum-momentum block
    const = heisenberg_tangential_projector(0.8)
    ps = pseudo_poisson(lambda z: const, np.zeros(3), np.array([1.0, 2.0, 3.0]))
    records.append(_record("pseudo-constant-flat", float(np.abs(ps[3:, 3:]).max()), CENTRALITY_TOL))

    # Leibniz rule of the induced bracket
    field = pseudo_poisson_field(p_field, 3, rank=4)
    zp = np.array([0.2, 0.5, -0.3, 1.0, -0.4, 0.7])

    def f_fn(w):
        return w[0] * w[3] + np.sin(w[1])

    def g_fn(w):
        return w[4] ** 2 + w[2]

    def h_fn(w):
        return np.cos(w[0]) + w[5] * w[1]

    def gh_fn(w):
        return g_fn(w) * h_fn(w)

    leib = abs(
        bracket(field, f_fn, gh_fn, zp)
        - g_fn(zp) * bracket(field, f_fn, h_fn, zp)
        - h_fn(zp) * bracket(field, f_fn, g_fn, zp)
    )
    records.append(_record("pseudo-leibniz", leib, EXTENSION_TOL))

    # the defect that makes the tensor "pseudo": reported, not bounded.
    # For (x, p_x, p_y) the defect is y/(1+y^2)^2 exactly.
    def pbr(f, g, zz):
        return bracket(field, f, g, zz)

    defect = jacobiator(
        pbr, coordinate_field(6, 0), coordinate_field(6, 3), coordinate_field(6, 4), zp
    )
    y = zp[1]
    expected = y / (1.0 + y * y) ** 2
    records.append(
        _info(
            "pseudo-jacobi-defect",
            abs(defect),
            f"nonzero by nonintegrability; closed form {abs(expected):.6f}",
        )
    )
    return records


# ---------------------------------------------------------------------------
# aggregate runner


def run_all(fuzz_trials: int = 300, seed: int = 2024, t_end: float = 2.0, h: float = 1e-3) -> list[CheckResult]:
    """Full check battery at CLI scale (shorter horizons than acceptance)."""
    records = []
    records += projector_fuzz(trials=fuzz_trials, seed=seed)
    records += scenario_matrix_checks()

    sleigh = chaplygin_sleigh(r=1.0, J=2.0)
    straj = integrate(
        sleigh, sleigh_initial_state(r=1.0, u=1.0, omega=1.0), t_end=t_end, h=h
    )
    records.append(
        _record("sleigh-reduced-match", sleigh_reduced_violation(straj, 1.0, 2.0), REDUCED_TOL)
    )
    records += trajectory_suite(straj, "sleigh")

    heis = heisenberg_particle()
    htraj = integrate(
        heis,
        heisenberg_initial_state(x=0.1, y=0.2, vx=1.0, vy=0.5),
        t_end=t_end,
        h=h,
    )
    records.append(
        _record("heisenberg-reduced-match", heisenberg_reduced_violation(htraj), REDUCED_TOL)
    )
    records.append(
        _record("heisenberg-vy-constant", velocity_component_drift(htraj, 1), 1e-9)
    )
    records += trajectory_suite(htraj, "heisenberg")

    records += backend_equivalence()
    order = rk4_order_estimate()
    records.append(
        CheckResult(
            name="rk4-order",
            violation=abs(order - 4.0),
            tol=0.2,
            passed=abs(order - 4.0) <= 0.2,
            detail=f"observed order {order:.3f}",
        )
    )

    records += dirac_suite()
    records += pseudo_suite()
    return records
