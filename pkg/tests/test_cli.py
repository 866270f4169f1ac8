"""Command-line interface: exit codes, formats, config handling."""

import json
import re
import subprocess
import sys

import numpy as np
import pytest

from projmech import cli
from projmech.scenarios import heisenberg_tangential_projector

FLOAT_16E = re.compile(r"^-?\d\.\d{16}e[+-]\d{2,3}$")


def run_cli(*argv):
    return cli.main(list(argv))


def sim_args(*extra, h="0.01", t_end="0.1"):
    return (
        "simulate",
        "--scenario",
        "sleigh",
        "--init",
        "theta=0.3,u=1,omega=0.5",
        "--t-end",
        t_end,
        "--h",
        h,
        "--backend",
        "numpy",
        *extra,
    )


class TestSimulateOutput:
    def test_csv_schema_and_precision(self, capsys):
        assert run_cli(*sim_args()) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "t,z0,z1,z2,v0,v1,v2,energy,constraint_residual0"
        assert len(lines) == 12  # header + 11 samples
        for cell in lines[1].split(",") + lines[-1].split(","):
            assert FLOAT_16E.match(cell), cell

    def test_output_is_byte_identical_across_runs(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli(*sim_args("--out", str(a))) == 0
        assert run_cli(*sim_args("--out", str(b))) == 0
        assert a.read_bytes() == b.read_bytes()
        assert "wrote 11 samples" in capsys.readouterr().err

    def test_json_format(self, capsys):
        assert run_cli(*sim_args("--format", "json")) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"t", "z", "v", "energy", "constraint_residual", "step", "backend"}
        assert payload["backend"] == "numpy"
        assert len(payload["t"]) == 11
        assert payload["step"] == pytest.approx(0.01)

    def test_energy_column_constant_for_free_motion(self, tmp_path, capsys):
        cfg = tmp_path / "inline.ini"
        cfg.write_text(
            "[system]\n"
            "metric = 1 0; 0 1\n"
            "constraint = 1 0\n"
            "rhs = 0\n"
            "[init]\n"
            "z = 0 0\n"
            "v = 0 1\n"
        )
        assert run_cli("simulate", "--config", str(cfg), "--t-end", "1", "--h", "0.01") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        header = lines[0].split(",")
        e_col = header.index("energy")
        r_col = header.index("constraint_residual0")
        for line in lines[1:]:
            cells = line.split(",")
            assert float(cells[e_col]) == 0.5
            assert float(cells[r_col]) == 0.0


class TestSimulateConfig:
    def test_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "sim.ini"
        cfg.write_text(
            "[simulate]\n"
            "scenario = sleigh\n"
            "t_end = 1.0\n"
            "h = 0.01\n"
            "backend = numpy\n"
            "[init]\n"
            "u = 1\n"
            "omega = 0.5\n"
        )
        assert run_cli("simulate", "--config", str(cfg), "--t-end", "0.05") == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert len(lines) == 7  # header + 6 samples of the overridden horizon

    def test_scenario_flag_resolves_ambiguous_config(self, tmp_path, capsys):
        cfg = tmp_path / "both.ini"
        cfg.write_text(
            "[simulate]\n"
            "scenario = sleigh\n"
            "[system]\n"
            "metric = 1\n"
            "[init]\n"
            "z = 0\n"
            "v = 1\n"
            "u = 1\n"
        )
        # both sources in one file is ambiguous
        assert run_cli("simulate", "--config", str(cfg), "--t-end", "0.1", "--h", "0.01") == 2
        assert "pick one" in capsys.readouterr().err

    def test_project_init_repairs_off_constraint_start(self, capsys):
        bad = (
            "simulate",
            "--scenario",
            "heisenberg",
            "--init",
            "y=0.5,vx=1,vz=0",  # admissible vz would be y*vx = 0.5
            "--t-end",
            "0.1",
            "--h",
            "0.01",
            "--backend",
            "numpy",
        )
        assert run_cli(*bad) == 2
        assert "--project-init" in capsys.readouterr().err
        assert run_cli(*bad, "--project-init") == 0


class TestSimulateExitCodes:
    def test_unknown_scenario_is_config_error(self, capsys):
        assert run_cli("simulate", "--scenario", "pendulum", "--t-end", "1", "--h", "0.1") == 2
        assert "unknown scenario" in capsys.readouterr().err

    def test_missing_grid_settings_are_config_errors(self, capsys):
        assert run_cli("simulate", "--scenario", "sleigh", "--h", "0.1") == 2
        assert "missing --t-end" in capsys.readouterr().err
        assert run_cli("simulate", "--scenario", "sleigh", "--t-end", "1") == 2
        assert "missing --h" in capsys.readouterr().err

    def test_unknown_init_key_is_config_error(self, capsys):
        assert run_cli(*sim_args("--init", "speed=1")) == 2
        assert "unknown initial key" in capsys.readouterr().err

    def test_missing_config_file(self, capsys):
        assert run_cli("simulate", "--config", "/nonexistent.ini", "--t-end", "1", "--h", "0.1") == 2
        assert "not found" in capsys.readouterr().err

    def test_degenerate_inline_constraints_exit_geometry(self, tmp_path, capsys):
        cfg = tmp_path / "rankdef.ini"
        cfg.write_text(
            "[system]\n"
            "metric = 1 0; 0 1\n"
            "constraint = 1 0; 1 0\n"
            "[init]\n"
            "z = 0 0\n"
            "v = 0 0\n"
        )
        assert run_cli("simulate", "--config", str(cfg), "--t-end", "0.1", "--h", "0.01") == 4
        assert "geometry error" in capsys.readouterr().err

    def test_blowup_exits_integration_and_writes_partial(self, tmp_path, capsys):
        out = tmp_path / "partial.csv"
        code = run_cli(
            *sim_args(
                "--init",
                "u=1e6,omega=1e6",
                "--out",
                str(out),
                h="10",
                t_end="100",
            )
        )
        assert code == 3
        err = capsys.readouterr().err
        assert "integration failed" in err and "partial trajectory" in err
        lines = out.read_text().strip().split("\n")
        assert 2 <= len(lines) < 12  # header plus at least the initial sample

    def test_verify_flags_invariant_drift(self, tmp_path, capsys):
        # a deliberately coarse step lets the energy drift past tolerance
        out = tmp_path / "coarse.csv"
        code = run_cli(*sim_args("--verify", "--out", str(out), h="0.4", t_end="2"))
        assert code == 1
        assert "invariant failed" in capsys.readouterr().err
        assert out.exists()  # the trajectory is still written

    def test_verify_passes_on_fine_step(self, tmp_path):
        out = tmp_path / "fine.csv"
        assert run_cli(*sim_args("--verify", "--out", str(out), h="1e-3", t_end="1")) == 0

    def test_no_arguments_is_usage_error(self, capsys):
        assert run_cli() == 2
        capsys.readouterr()


class TestPoisson:
    def test_dirac_decomposition_payload(self, tmp_path, capsys):
        cfg = tmp_path / "dirac.ini"
        cfg.write_text(
            "[poisson]\n"
            "tensor = 0 1 0 0; -1 0 0 0; 0 0 0 1; 0 0 -1 0\n"
            "constraints = 2 3\n"
        )
        assert run_cli("poisson", "--config", str(cfg)) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["constraints"] == [2, 3]
        assert payload["lambda"] == [[0.0, 1.0], [-1.0, 0.0]]
        pi_m = np.array(payload["pi_m"])
        expected = np.zeros((4, 4))
        expected[0, 1], expected[1, 0] = 1.0, -1.0
        assert np.array_equal(pi_m, expected)
        assert np.array_equal(
            np.array(payload["pi_s"]) + pi_m, np.array(payload["pi_w"])
        )

    def test_leaf_projector_payload(self, tmp_path, capsys):
        cfg = tmp_path / "leaf.ini"
        cfg.write_text(
            "[poisson]\n"
            "tensor = 0 1.7 0; -1.7 0 0; 0 0 0\n"
            "leaf_dim = 2\n"
        )
        assert run_cli("poisson", "--config", str(cfg)) == 0
        payload = json.loads(capsys.readouterr().out)
        onto = np.array(payload["leaf"]["onto_leaf"])
        assert np.allclose(onto, np.diag([1.0, 1.0, 0.0]), atol=1e-14)
        variant = np.array(payload["leaf"]["weighted_variant"])
        assert variant[0, 1] == pytest.approx(-1 / 1.7)

    def test_first_class_constraints_exit_geometry(self, tmp_path, capsys):
        cfg = tmp_path / "firstclass.ini"
        cfg.write_text(
            "[poisson]\n"
            "tensor = 0 1 0 0; -1 0 0 0; 0 0 0 1; 0 0 -1 0\n"
            "constraints = 0 2\n"
        )
        assert run_cli("poisson", "--config", str(cfg)) == 4
        assert "geometry error" in capsys.readouterr().err

    def test_declared_rank_mismatch_is_config_error(self, tmp_path, capsys):
        cfg = tmp_path / "rank.ini"
        cfg.write_text(
            "[poisson]\n"
            "tensor = 0 1 0 0; -1 0 0 0; 0 0 0 1; 0 0 -1 0\n"
            "rank = 2\n"
        )
        assert run_cli("poisson", "--config", str(cfg)) == 2
        assert "rank" in capsys.readouterr().err

    def test_pseudo_tensor_payload(self, capsys):
        z = np.array([0.3, 0.5, -0.2])
        p = np.array([1.1, 0.4, -0.7])
        point = ",".join(str(x) for x in np.concatenate([z, p]))
        assert run_cli("poisson", "--scenario", "heisenberg", "--point", point) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["scenario"] == "heisenberg"
        proj = np.array(payload["projector"])
        assert np.allclose(proj, heisenberg_tangential_projector(0.5), atol=1e-15)
        pseudo = np.array(payload["pseudo"])
        assert pseudo.shape == (6, 6)
        assert np.allclose(pseudo[:3, 3:], proj, atol=1e-15)
        assert np.allclose(pseudo + pseudo.T, 0.0, atol=1e-8)
        # momentum block against the closed form of the slanted-plane field
        s = 1 + 0.5**2
        c0 = (-2 * 0.5 * 1.1 + (1 - 0.25) * -0.7) / s**2
        c2 = ((1 - 0.25) * 1.1 + 2 * 0.5 * -0.7) / s**2
        assert pseudo[3, 4] == pytest.approx(c0, abs=1e-8)
        assert pseudo[5, 4] == pytest.approx(c2, abs=1e-8)

    def test_pseudo_needs_phase_point(self, capsys):
        assert run_cli("poisson", "--scenario", "heisenberg") == 2
        assert "--point" in capsys.readouterr().err
        assert run_cli("poisson", "--scenario", "heisenberg", "--point", "1,2,3") == 2
        assert "6 entries" in capsys.readouterr().err

    def test_unknown_sleigh_parameter_rejected(self, capsys):
        assert (
            run_cli(
                "poisson",
                "--scenario",
                "sleigh",
                "--point",
                "0,0,0,1,0,0",
                "--param",
                "mass=3",
            )
            == 2
        )
        assert "unknown sleigh parameter" in capsys.readouterr().err

    def test_bare_invocation_is_config_error(self, capsys):
        assert run_cli("poisson") == 2
        assert "--scenario" in capsys.readouterr().err


class TestCheck:
    def test_small_battery_passes_and_prints_summary(self, capsys):
        code = run_cli("check", "--fuzz-trials", "5", "--t-end", "0.5", "--h", "5e-3")
        out = capsys.readouterr().out
        assert code == 0
        assert re.search(r"^\d+ checks: \d+ passed, 0 failed, \d+ informational$", out, re.M)
        assert "PASS" in out and "INFO" in out and "FAIL" not in out


def test_module_entrypoint_reports_version():
    proc = subprocess.run(
        [sys.executable, "-m", "projmech", "--version"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "projmech 0.1.0"
