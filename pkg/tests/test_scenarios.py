"""Built-in scenarios: construction, oracles, closed-form geometry."""

import numpy as np
import numpy.testing as npt
import pytest

from projmech import (
    LagrangianSystem,
    chaplygin_sleigh,
    energy,
    heisenberg_initial_state,
    heisenberg_oblique_frame,
    heisenberg_particle,
    heisenberg_reduced_oracle,
    integrate,
    sleigh_body_velocities,
    sleigh_initial_state,
    sleigh_reduced_oracle,
)
from projmech.scenarios import (
    SCENARIOS,
    heisenberg_metric_q,
    heisenberg_similarity,
    heisenberg_tangential_projector,
    heisenberg_transverse_projector,
    sleigh_transverse_projector,
)


class TestSleighConstruction:
    def test_systems_are_cached_by_parameters(self):
        assert chaplygin_sleigh(1.0, 2.0) is chaplygin_sleigh(r=1.0, J=2.0)
        assert chaplygin_sleigh(1.0, 2.0) is not chaplygin_sleigh(1.0, 2.5)

    def test_nonpositive_inertia_rejected(self):
        with pytest.raises(ValueError):
            chaplygin_sleigh(r=1.0, J=0.0)
        with pytest.raises(ValueError):
            chaplygin_sleigh(r=1.0, J=-2.0)

    def test_initial_state_sits_on_constraint(self):
        system = chaplygin_sleigh(r=0.8, J=1.5)
        for theta, u, omega in [(0.0, 1.0, 1.0), (0.9, -0.4, 2.0), (-2.0, 0.0, 0.3)]:
            state = sleigh_initial_state(r=0.8, theta=theta, u=u, omega=omega)
            res = system.pfaffian.residual(state.z, state.v, state.t)
            npt.assert_allclose(res, np.zeros(1), atol=1e-14)

    def test_body_velocity_roundtrip(self):
        state = sleigh_initial_state(r=0.8, theta=1.1, u=1.3, omega=-0.6)
        u, w, omega = sleigh_body_velocities(state.z, state.v)
        assert u == pytest.approx(1.3, abs=1e-14)
        assert w == pytest.approx(0.8 * -0.6, abs=1e-14)  # no-slip: w = r*omega
        assert omega == pytest.approx(-0.6, abs=1e-14)

    def test_transverse_projector_matches_system(self):
        system = chaplygin_sleigh(r=1.0, J=2.0)
        for theta in (0.0, 0.7, -1.9, np.pi / 2):
            pair = system.projector_pair(np.array([0.3, -0.1, theta]))
            npt.assert_allclose(pair.q, sleigh_transverse_projector(theta, 1.0, 2.0), atol=1e-12)


class TestSleighOracle:
    def test_reduced_energy_is_conserved(self):
        r, J = 1.0, 2.0
        _, us, ws = sleigh_reduced_oracle(1.0, 1.0, r=r, J=J, t_end=5.0, h=1e-3)
        e = 0.5 * us**2 + 0.5 * (J + r * r) * ws**2
        assert np.abs(e - e[0]).max() < 1e-10

    def test_full_simulation_matches_reduced_oracle(self):
        r, J, h = 1.0, 2.0, 1e-3
        system = chaplygin_sleigh(r=r, J=J)
        init = sleigh_initial_state(r=r, theta=0.0, u=1.0, omega=1.0)
        traj = integrate(system, init, t_end=1.0, h=h)
        u, w, omega = sleigh_body_velocities(traj.z, traj.v)
        _, us, ws = sleigh_reduced_oracle(1.0, 1.0, r=r, J=J, t_end=1.0, h=h)
        npt.assert_allclose(u, us, atol=1e-10)
        npt.assert_allclose(omega, ws, atol=1e-10)
        npt.assert_allclose(w, r * ws, atol=1e-10)
        assert np.abs(traj.energy - traj.energy[0]).max() < 1e-9


class TestHeisenbergConstruction:
    def test_system_is_cached(self):
        assert heisenberg_particle() is heisenberg_particle()

    def test_initial_state_lifts_onto_constraint(self):
        state = heisenberg_initial_state(x=0.1, y=0.8, vx=1.2, vy=-0.5)
        assert state.v[2] == pytest.approx(0.8 * 1.2, abs=1e-15)
        res = heisenberg_particle().pfaffian.residual(state.z, state.v)
        npt.assert_allclose(res, np.zeros(1), atol=1e-15)

    def test_explicit_vertical_velocity_is_kept(self):
        state = heisenberg_initial_state(y=0.8, vx=1.2, vz=0.0)
        assert state.v[2] == 0.0


class TestHeisenbergGeometry:
    @pytest.mark.parametrize("y", [0.0, 0.5, -1.3, 2.0])
    def test_projectors_are_complementary_and_admissible(self, y):
        p = heisenberg_tangential_projector(y)
        q = heisenberg_transverse_projector(y)
        npt.assert_allclose(p + q, np.eye(3), atol=1e-15)
        constraint_row = np.array([-y, 0.0, 1.0])
        npt.assert_allclose(constraint_row @ p, np.zeros(3), atol=1e-15)

    @pytest.mark.parametrize("y", [0.0, 0.5, -1.3, 2.0])
    def test_oblique_chart_is_similar_to_orthogonal(self, y):
        u = heisenberg_similarity(y)
        q_oblique = heisenberg_metric_q(y)
        recovered = u @ q_oblique @ np.linalg.inv(u)
        npt.assert_allclose(recovered, heisenberg_transverse_projector(y), atol=1e-12)

    def test_oblique_coframe_row_is_the_constraint_form(self):
        frame = heisenberg_oblique_frame(0.7)
        npt.assert_allclose(frame.coframe_rows(), [[-0.7, 0.0, 1.0]], atol=1e-15)


class TestHeisenbergOracle:
    def test_oracle_conserves_energy_and_lateral_velocity(self):
        _, pos, vel = heisenberg_reduced_oracle(0.0, 0.5, 0.0, 1.0, 0.4, t_end=5.0, h=1e-3)
        npt.assert_allclose(vel[:, 1], 0.4, atol=1e-14)
        e = 0.5 * (vel**2).sum(axis=1)
        assert np.abs(e - e[0]).max() < 1e-10

    def test_full_simulation_matches_reduced_oracle(self):
        h = 1e-3
        init = heisenberg_initial_state(y=0.5, vx=1.0, vy=0.4)
        traj = integrate(heisenberg_particle(), init, t_end=2.0, h=h)
        _, pos, vel = heisenberg_reduced_oracle(0.0, 0.5, 0.0, 1.0, 0.4, t_end=2.0, h=h)
        npt.assert_allclose(traj.z, pos, atol=1e-8)
        npt.assert_allclose(traj.v, vel, atol=1e-8)
        # the lateral direction is unconstrained and force-free
        npt.assert_allclose(traj.v[:, 1], 0.4, atol=1e-12)


class TestScenarioRegistry:
    def test_expected_entries(self):
        assert set(SCENARIOS) == {"sleigh", "heisenberg"}

    @pytest.mark.parametrize("name", sorted(SCENARIOS))
    def test_defaults_build_and_integrate(self, name):
        spec = SCENARIOS[name]
        assert spec.name == name
        assert set(spec.param_defaults) == set(spec.param_names)
        system = spec.build(dict(spec.param_defaults))
        assert isinstance(system, LagrangianSystem)
        moving = {"sleigh": {"u": 1.0, "omega": 0.5}, "heisenberg": {"vx": 1.0, "y": 0.5}}
        init = spec.initial(dict(spec.param_defaults), moving[name])
        res = system.pfaffian.residual(init.z, init.v, init.t)
        npt.assert_allclose(res, np.zeros(system.m), atol=1e-14)
        traj = integrate(system, init, t_end=0.05, h=5e-3)
        assert len(traj) == 11
        assert np.isfinite(traj.energy).all()
        assert energy(system, traj.z[-1], traj.v[-1]) == pytest.approx(traj.energy[-1], abs=1e-14)

    def test_sleigh_init_keys_cover_body_velocities(self):
        assert {"theta", "u", "omega"} <= set(SCENARIOS["sleigh"].init_keys)
