"""Command-line interface: simulate, check and poisson subcommands.

Exit codes
----------
0   success
1   an invariant check failed (``check``, or ``simulate --verify``)
2   configuration problem: bad flags, files, keys or initial data
3   integration failure mid-run (partial output is still written)
4   degenerate geometry: singular metric, dependent constraints,
    first-class constraint set, or a singular leaf block

Trajectory CSV schema: one row per sample, columns
``t, z0..z{n-1}, v0..v{n-1}, energy, constraint_residual0..{m-1}``,
every value printed with 17 significant digits (``%.16e``), so output
is byte-identical across runs and round-trips to the same float64.

Config files are INI. ``[simulate]`` holds flag defaults (scenario,
t_end, h, format, backend); ``[params]`` and ``[init]`` feed the
scenario; ``[system]`` defines an inline constant-coefficient system
(keys ``metric``, ``constraint``, ``rhs``; matrices use ';' between
rows) whose initial data are the vectors ``z`` and ``v`` in
``[init]``. Position-dependent fields need the library API.
``[poisson]`` defines a pointwise tensor decomposition (keys
``tensor``, ``rank``, ``constraints`` as coordinate indices,
``point``, optional ``leaf_dim``).
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, checks
from .dynamics import (
    LagrangianSystem,
    State,
    Trajectory,
    integrate,
    project_initial_velocity,
)
from .errors import (
    DegenerateConstraints,
    DifferentiationFailure,
    FirstClassConstraint,
    IllPosedDynamics,
    IntegrationFailure,
    NotSymplecticOnLeaf,
    SingularMetric,
)
from .poisson import (
    PoissonField,
    SecondClassConstraintSet,
    leaf_projectors,
    pseudo_poisson,
    transverse_decomposition,
)
from .scenarios import (
    SCENARIOS,
    heisenberg_tangential_projector,
    sleigh_transverse_projector,
)

__all__ = ["main", "build_parser", "format_trajectory_csv"]

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_GEOMETRY = 4


class ConfigError(Exception):
    """User-facing configuration problem (exit code 2)."""


# ---------------------------------------------------------------------------
# parsing helpers


def _parse_vector(text: str) -> np.ndarray:
    entries = text.replace(",", " ").split()
    if not entries:
        raise ConfigError("empty vector")
    try:
        return np.array([float(x) for x in entries])
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in (row.strip() for row in text.split(";")) if r]
    if not rows:
        raise ConfigError("empty matrix")
    parsed = [_parse_vector(row) for row in rows]
    width = parsed[0].shape[0]
    if any(row.shape[0] != width for row in parsed):
        raise ConfigError(f"ragged matrix rows in {text!r}")
    return np.vstack(parsed)


def _parse_value(text: str):
    """Scalar float, or a tuple for parenthesized vectors."""
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        inner = text[1:-1].replace(",", " ")
        return tuple(float(x) for x in inner.split())
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"bad numeric value {text!r}") from None


def _parse_assignments(text: str) -> dict:
    """Parse "k=v,k=(a,b,c)" with commas grouped by parentheses."""
    parts, cur, depth = [], [], 0
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    out = {}
    for part in parts:
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = _parse_value(value)
    return out


def _load_config(path: str | None) -> configparser.ConfigParser:
    cfg = configparser.ConfigParser()
    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cfg.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    return cfg


def _section(cfg: configparser.ConfigParser, name: str) -> dict:
    return dict(cfg[name]) if cfg.has_section(name) else {}


def _setting(args_value, cfg_section: dict, key: str, convert, default=None):
    """Flag value, else config value, else default."""
    if args_value is not None:
        return args_value
    if key in cfg_section:
        raw = cfg_section[key]
        try:
            return convert(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [simulate] {key} = {raw!r}: {exc}") from None
    return default


# ---------------------------------------------------------------------------
# system construction


def _scenario_setup(name: str, cfg, param_flags, init_flags):
    if name not in SCENARIOS:
        known = ", ".join(sorted(SCENARIOS))
        raise ConfigError(f"unknown scenario {name!r} (known: {known})")
    spec = SCENARIOS[name]

    params = dict(spec.param_defaults)
    for key, raw in _section(cfg, "params").items():
        params[key] = _parse_value(raw)
    for text in param_flags or ():
        params.update(_parse_assignments(text))
    unknown = set(params) - set(spec.param_names)
    if unknown:
        raise ConfigError(
            f"unknown parameter(s) {sorted(unknown)} for scenario {name!r}; "
            f"valid: {list(spec.param_names)}"
        )

    init = {}
    for key, raw in _section(cfg, "init").items():
        init[key] = _parse_value(raw)
    for text in init_flags or ():
        init.update(_parse_assignments(text))
    unknown = set(init) - set(spec.init_keys)
    if unknown:
        raise ConfigError(
            f"unknown initial key(s) {sorted(unknown)} for scenario {name!r}; "
            f"valid: {list(spec.init_keys)}"
        )

    system = spec.build(params)
    state = spec.initial(params, init)
    return system, state


def _inline_setup(cfg, init_flags):
    sysc = _section(cfg, "system")
    if "metric" not in sysc:
        raise ConfigError("[system] needs a 'metric' key")
    gmat = _parse_matrix(sysc["metric"])
    n = gmat.shape[0]
    if gmat.shape != (n, n):
        raise ConfigError(f"metric must be square, got {gmat.shape}")

    if "constraint" in sysc:
        amat = _parse_matrix(sysc["constraint"])
        if amat.shape[1] != n:
            raise ConfigError(
                f"constraint has {amat.shape[1]} columns, metric dimension is {n}"
            )
    else:
        amat = np.zeros((0, n))
    m = amat.shape[0]

    if "rhs" in sysc:
        bvec = _parse_vector(sysc["rhs"])
        if bvec.shape[0] != m:
            raise ConfigError(f"rhs has {bvec.shape[0]} entries, expected {m}")
    else:
        bvec = np.zeros(m)

    system = LagrangianSystem.from_callbacks(
        n,
        m,
        metric=lambda z, _g=gmat: _g,
        potential=lambda z: 0.0,
        constraint=lambda z, _a=amat: _a,
        constraint_rhs=lambda t, _b=bvec: _b,
        jit=False,
    )

    init = {}
    for key, raw in _section(cfg, "init").items():
        init[key] = raw
    merged_flags = {}
    for text in init_flags or ():
        merged_flags.update(_parse_assignments(text))

    def vector_of(key):
        if key in merged_flags:
            return np.array(merged_flags[key], dtype=float).reshape(-1)
        if key in init:
            return _parse_vector(init[key])
        raise ConfigError(f"inline system needs initial vector {key!r} in [init] or --init")

    z0 = vector_of("z")
    v0 = vector_of("v")
    if z0.shape[0] != n or v0.shape[0] != n:
        raise ConfigError(f"initial vectors must have {n} entries")
    return system, State(z=z0, v=v0)


# ---------------------------------------------------------------------------
# output formatting


def format_trajectory_csv(traj: Trajectory) -> str:
    n = traj.z.shape[1]
    m = traj.constraint_residual.shape[1]
    columns = (
        ["t"]
        + [f"z{i}" for i in range(n)]
        + [f"v{i}" for i in range(n)]
        + ["energy"]
        + [f"constraint_residual{j}" for j in range(m)]
    )
    lines = [",".join(columns)]
    for k in range(len(traj)):
        row = [traj.t[k], *traj.z[k], *traj.v[k], traj.energy[k], *traj.constraint_residual[k]]
        lines.append(",".join(f"{val:.16e}" for val in row))
    return "\n".join(lines) + "\n"


def _trajectory_json(traj: Trajectory) -> str:
    payload = {
        "t": traj.t.tolist(),
        "z": traj.z.tolist(),
        "v": traj.v.tolist(),
        "energy": traj.energy.tolist(),
        "constraint_residual": traj.constraint_residual.tolist(),
        "step": traj.step,
        "backend": traj.backend,
    }
    return json.dumps(payload, indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    sim = _section(cfg, "simulate")

    scenario = args.scenario or sim.get("scenario")
    has_inline = cfg.has_section("system")
    if scenario and has_inline and args.scenario is None:
        raise ConfigError("config defines both [simulate] scenario and [system]; pick one")
    if not scenario and not has_inline:
        raise ConfigError("no system: pass --scenario or a config with [system]")

    t_end = _setting(args.t_end, sim, "t_end", float)
    if t_end is None:
        raise ConfigError("missing --t-end")
    h = _setting(args.h, sim, "h", float)
    if h is None:
        raise ConfigError("missing --h")
    fmt = _setting(args.format, sim, "format", str, "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}; use csv or json")
    backend = _setting(args.backend, sim, "backend", str)

    if scenario:
        system, state = _scenario_setup(scenario, cfg, args.param, args.init)
    else:
        system, state = _inline_setup(cfg, args.init)

    if args.project_init:
        v = project_initial_velocity(system, state.z, state.v, state.t)
        state = State(z=state.z, v=v, t=state.t)

    render = format_trajectory_csv if fmt == "csv" else _trajectory_json
    try:
        traj = integrate(system, state, t_end=t_end, h=h, backend=backend)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    except IntegrationFailure as exc:
        if exc.trajectory is not None:
            _emit(render(exc.trajectory), args.out)
            if args.out:
                print(
                    f"partial trajectory ({len(exc.trajectory)} samples) written to {args.out}",
                    file=sys.stderr,
                )
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION

    _emit(render(traj), args.out)
    if args.out:
        print(
            f"wrote {len(traj)} samples to {args.out} (backend {traj.backend})",
            file=sys.stderr,
        )

    if args.verify:
        label = scenario or "system"
        records = checks.trajectory_suite(traj, label)
        failed = [r for r in records if not r.passed]
        for rec in failed:
            print(
                f"invariant failed: {rec.name} "
                f"(violation {rec.violation:.3e} > tol {rec.tol:.1e})",
                file=sys.stderr,
            )
        if failed:
            return EXIT_INVARIANT
    return EXIT_OK


def _print_check_table(records) -> None:
    width = max(len(r.name) for r in records)
    for rec in records:
        status = "INFO" if rec.info else ("PASS" if rec.passed else "FAIL")
        tol = "-" if rec.info else f"{rec.tol:.1e}"
        line = f"{status}  {rec.name:<{width}}  value {rec.violation:.6e}  tol {tol}"
        if rec.detail:
            line += f"  ({rec.detail})"
        print(line)


def cmd_check(args) -> int:
    records = checks.run_all(
        fuzz_trials=args.fuzz_trials,
        seed=args.seed,
        t_end=args.t_end if args.t_end is not None else 2.0,
        h=args.h if args.h is not None else 1e-3,
    )
    _print_check_table(records)
    enforced = [r for r in records if not r.info]
    failed = [r for r in enforced if not r.passed]
    info = len(records) - len(enforced)
    print(
        f"{len(enforced)} checks: {len(enforced) - len(failed)} passed, "
        f"{len(failed)} failed, {info} informational"
    )
    return EXIT_INVARIANT if failed else EXIT_OK


def _poisson_from_config(cfg, point_flag, out) -> int:
    pc = _section(cfg, "poisson")
    if "tensor" not in pc:
        raise ConfigError("[poisson] needs a 'tensor' key")
    mat = _parse_matrix(pc["tensor"])
    dim = mat.shape[0]
    if mat.shape != (dim, dim):
        raise ConfigError(f"tensor must be square, got {mat.shape}")

    if point_flag is not None:
        point = _parse_vector(point_flag)
    elif "point" in pc:
        point = _parse_vector(pc["point"])
    else:
        point = np.zeros(dim)
    if point.shape[0] != dim:
        raise ConfigError(f"point has {point.shape[0]} entries, tensor dimension is {dim}")

    if "rank" in pc:
        rank = int(pc["rank"])
    else:
        sv = np.linalg.svd(mat, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * sv[0])) if sv.size and sv[0] > 0 else 0
        if rank % 2:
            raise ConfigError(f"inferred odd numerical rank {rank}; set 'rank' explicitly")
    try:
        field = PoissonField(dim=dim, rank=rank, eval=lambda z, _m=mat: _m)
        field.validate_at(point)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    payload: dict = {"point": point.tolist(), "pi_w": mat.tolist()}

    if "constraints" in pc:
        indices = [int(x) for x in pc["constraints"].replace(",", " ").split()]
        if any(not 0 <= i < dim for i in indices):
            raise ConfigError(f"constraint indices {indices} out of range for dim {dim}")
        cons = SecondClassConstraintSet.from_coordinates(dim, indices)
        dec = transverse_decomposition(field, cons, point)
        payload["constraints"] = indices
        payload["pi_s"] = dec.pi_s.tolist()
        payload["pi_m"] = dec.pi_m.tolist()
        payload["lambda"] = dec.bracket_matrix.tolist()

    if "leaf_dim" in pc:
        leaf = leaf_projectors(field, point, leaf_dim=int(pc["leaf_dim"]))
        payload["leaf"] = {
            "onto_leaf": leaf.onto_leaf.tolist(),
            "onto_transverse": leaf.onto_transverse.tolist(),
            "weighted_variant": leaf.weighted_variant.tolist(),
        }

    _emit(json.dumps(payload, indent=2) + "\n", out)
    return EXIT_OK


def _poisson_pseudo(scenario: str, point_flag, param_flags, out) -> int:
    if point_flag is None:
        raise ConfigError("--point Z0..,P0.. (2n entries) is required with --scenario")
    phase = _parse_vector(point_flag)
    params = {}
    for text in param_flags or ():
        params.update(_parse_assignments(text))

    if scenario == "heisenberg":
        if params:
            raise ConfigError("heisenberg takes no parameters")

        def p_field(z):
            return heisenberg_tangential_projector(z[1])

        n = 3
    elif scenario == "sleigh":
        r = float(params.pop("r", 1.0))
        jj = float(params.pop("J", 2.0))
        if params:
            raise ConfigError(f"unknown sleigh parameter(s) {sorted(params)}")

        def p_field(z):
            return np.eye(3) - sleigh_transverse_projector(z[2], r, jj)

        n = 3
    else:
        raise ConfigError(f"unknown scenario {scenario!r} for poisson (known: heisenberg, sleigh)")

    if phase.shape[0] != 2 * n:
        raise ConfigError(f"--point needs {2 * n} entries (z then p), got {phase.shape[0]}")
    z, p = phase[:n], phase[n:]
    tensor = pseudo_poisson(p_field, z, p)
    payload = {
        "scenario": scenario,
        "point": z.tolist(),
        "momentum": p.tolist(),
        "projector": np.asarray(p_field(z)).tolist(),
        "pseudo": tensor.tolist(),
    }
    _emit(json.dumps(payload, indent=2) + "\n", out)
    return EXIT_OK


def cmd_poisson(args) -> int:
    if args.scenario is not None:
        return _poisson_pseudo(args.scenario, args.point, args.param, args.out)
    if args.config is None:
        raise ConfigError("poisson needs --scenario (pseudo tensor) or --config with [poisson]")
    cfg = _load_config(args.config)
    if not cfg.has_section("poisson"):
        raise ConfigError(f"{args.config} has no [poisson] section")
    return _poisson_from_config(cfg, args.point, args.out)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="projmech",
        description="Projected dynamics of linearly constrained mechanical systems.",
    )
    parser.add_argument("--version", action="version", version=f"projmech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="integrate a trajectory and write samples")
    sim.add_argument("--scenario", help="built-in system: " + ", ".join(sorted(SCENARIOS)))
    sim.add_argument("--config", help="INI file with [simulate]/[params]/[init]/[system]")
    sim.add_argument("--param", action="append", metavar="K=V", help="scenario parameter (repeatable)")
    sim.add_argument("--init", action="append", metavar="K=V,...", help="initial data assignments")
    sim.add_argument("--t-end", dest="t_end", type=float, help="final time")
    sim.add_argument("--h", type=float, help="step size")
    sim.add_argument("--out", help="output path (default stdout)")
    sim.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
    sim.add_argument("--backend", choices=("numba", "numpy"), help="integration backend")
    sim.add_argument(
        "--project-init",
        action="store_true",
        help="project the initial velocity onto the constraint first",
    )
    sim.add_argument(
        "--verify",
        action="store_true",
        help="fail (exit 1) if energy or constraint invariants drift beyond tolerance",
    )
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check", help="run the invariant battery")
    chk.add_argument("--fuzz-trials", type=int, default=300, help="randomized trials (default 300)")
    chk.add_argument("--seed", type=int, default=2024, help="fuzz seed (default 2024)")
    chk.add_argument("--t-end", dest="t_end", type=float, help="trajectory check horizon (default 2)")
    chk.add_argument("--h", type=float, help="trajectory check step (default 1e-3)")
    chk.set_defaults(func=cmd_check)

    poi = sub.add_parser("poisson", help="tensor decompositions and pseudo tensors (JSON)")
    poi.add_argument("--config", help="INI file with a [poisson] section")
    poi.add_argument("--scenario", help="pseudo tensor of a built-in projector field")
    poi.add_argument("--point", help="evaluation point (phase point z..,p.. with --scenario)")
    poi.add_argument("--param", action="append", metavar="K=V", help="scenario parameter")
    poi.add_argument("--out", help="output path (default stdout)")
    poi.set_defaults(func=cmd_poisson)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints its own message
        return int(exc.code) if exc.code else 0

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationFailure as exc:
        print(f"integration failed: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    except (
        DegenerateConstraints,
        SingularMetric,
        FirstClassConstraint,
        NotSymplecticOnLeaf,
        IllPosedDynamics,
        DifferentiationFailure,
    ) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY


if __name__ == "__main__":
    sys.exit(main())
