import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpfl.dynamics import (ManipulatorModel, RobotState, ScaledIdentityNominal,
                           SimulationAborted, TrueModelNominal, coriolis,
                           forward_dynamics, gravity, inertia,
                           inverse_dynamics, kinetic_energy, potential_energy,
                           simulate, total_energy)
from oracles import TwoLinkOracle, finite_difference_inertia_rate

UNIT_RODS = ManipulatorModel(masses=(1.0, 1.0), lengths=(1.0, 1.0),
                             com_offsets=(0.5, 0.5),
                             inertias=(1.0 / 12.0, 1.0 / 12.0))

ASYMMETRIC = ManipulatorModel(masses=(1.5, 0.8), lengths=(0.9, 0.7),
                              com_offsets=(0.45, 0.3), inertias=(0.02, 0.01))

angles = st.floats(-10.0, 10.0)
rates = st.floats(-5.0, 5.0)


def _state_pairs(rng, n):
    for _ in range(n):
        yield (rng.uniform(-np.pi, np.pi, size=2),
               rng.uniform(-3.0, 3.0, size=2))


class TestClosedForms:
    def test_inertia_at_zero(self):
        M = inertia(UNIT_RODS, np.zeros(2))
        expected = np.array([[8.0 / 3.0, 5.0 / 6.0], [5.0 / 6.0, 1.0 / 3.0]])
        np.testing.assert_allclose(M, expected, atol=1e-10)

    def test_gravity_at_zero(self):
        g = gravity(UNIT_RODS, np.zeros(2))
        np.testing.assert_allclose(g, [19.62, 4.905], atol=1e-10)

    def test_gravity_hanging_down(self):
        g = gravity(UNIT_RODS, np.array([-np.pi / 2.0, 0.0]))
        np.testing.assert_allclose(g, [0.0, 0.0], atol=1e-12)

    def test_coriolis_torque_frozen_value(self):
        q = np.array([0.3, -1.1])
        dq = np.array([0.7, -0.4])
        value = coriolis(UNIT_RODS, q, dq) @ dq
        np.testing.assert_allclose(
            value, [-0.17824147201228704, -0.21834580321505165], atol=1e-12)

    def test_potential_energy_upright(self):
        assert potential_energy(UNIT_RODS, np.zeros(2)) == pytest.approx(0.0)
        up = potential_energy(UNIT_RODS, np.array([np.pi / 2.0, 0.0]))
        assert up == pytest.approx(19.62, abs=1e-10)

    def test_inertia_periodic_in_q(self):
        q = np.array([0.7, -0.4])
        np.testing.assert_allclose(inertia(UNIT_RODS, q),
                                   inertia(UNIT_RODS, q + 2.0 * np.pi),
                                   atol=1e-12)


@pytest.mark.parametrize("model", [UNIT_RODS, ASYMMETRIC,
                                   ManipulatorModel()], ids=["unit", "asym", "default"])
class TestAgainstSymbolicOracle:
    def test_inertia_coriolis_gravity(self, model):
        oracle = TwoLinkOracle(model.masses, model.lengths, model.com_offsets,
                               model.inertias, model.gravity)
        rng = np.random.default_rng(7)
        for q, dq in _state_pairs(rng, 50):
            np.testing.assert_allclose(inertia(model, q), oracle.inertia(q),
                                       atol=1e-10)
            np.testing.assert_allclose(gravity(model, q), oracle.gravity(q),
                                       atol=1e-10)
            np.testing.assert_allclose(coriolis(model, q, dq) @ dq,
                                       oracle.coriolis_torque(q, dq), atol=1e-10)

    def test_inverse_dynamics(self, model):
        oracle = TwoLinkOracle(model.masses, model.lengths, model.com_offsets,
                               model.inertias, model.gravity)
        rng = np.random.default_rng(8)
        for q, dq in _state_pairs(rng, 20):
            ddq = rng.uniform(-5.0, 5.0, size=2)
            np.testing.assert_allclose(inverse_dynamics(model, q, dq, ddq),
                                       oracle.inverse_dynamics(q, dq, ddq),
                                       atol=1e-9)


class TestStructuralProperties:
    @settings(max_examples=50, deadline=None)
    @given(q1=angles, q2=angles)
    def test_inertia_symmetric_positive_definite(self, q1, q2):
        M = inertia(UNIT_RODS, np.array([q1, q2]))
        np.testing.assert_allclose(M, M.T, atol=1e-14)
        assert np.linalg.eigvalsh(M).min() > 0.0

    @settings(max_examples=50, deadline=None)
    @given(q1=angles, q2=angles, dq1=rates, dq2=rates)
    def test_skew_symmetry(self, q1, q2, dq1, dq2):
        q = np.array([q1, q2])
        dq = np.array([dq1, dq2])
        m_dot = finite_difference_inertia_rate(
            lambda qq: inertia(UNIT_RODS, qq), q, dq)
        S = m_dot - 2.0 * coriolis(UNIT_RODS, q, dq)
        assert np.abs(S + S.T).max() < 1e-6

    @settings(max_examples=50, deadline=None)
    @given(q1=angles, q2=angles, dq1=rates, dq2=rates)
    def test_kinetic_energy_nonnegative(self, q1, q2, dq1, dq2):
        assert kinetic_energy(UNIT_RODS, np.array([q1, q2]),
                              np.array([dq1, dq2])) >= 0.0

    def test_forward_inverse_consistency(self):
        rng = np.random.default_rng(3)
        for q, dq in _state_pairs(rng, 30):
            ddq = rng.uniform(-8.0, 8.0, size=2)
            tau = inverse_dynamics(ASYMMETRIC, q, dq, ddq)
            back = forward_dynamics(ASYMMETRIC, RobotState(q, dq), tau)
            np.testing.assert_allclose(back, ddq, atol=1e-9)

    def test_forward_dynamics_algebraic_identity(self):
        rng = np.random.default_rng(4)
        for q, dq in _state_pairs(rng, 30):
            tau = rng.uniform(-30.0, 30.0, size=2)
            ddq = forward_dynamics(UNIT_RODS, RobotState(q, dq), tau)
            residual = (inertia(UNIT_RODS, q) @ ddq
                        + coriolis(UNIT_RODS, q, dq) @ dq
                        + gravity(UNIT_RODS, q) - tau)
            np.testing.assert_allclose(residual, np.zeros(2), atol=1e-10)


class TestNominalModels:
    def test_scaled_identity(self):
        nominal = ScaledIdentityNominal(n_joints=2, scale=0.5)
        q = np.array([0.2, -0.4])
        np.testing.assert_allclose(nominal.inertia(q), 0.5 * np.eye(2))
        np.testing.assert_allclose(nominal.bias(q, q), np.zeros(2))
        np.testing.assert_allclose(nominal.apply_inverse(q, np.array([1.0, -2.0])),
                                   [2.0, -4.0])

    def test_scaled_identity_rejects_nonpositive_scale(self):
        with pytest.raises(ValueError):
            ScaledIdentityNominal(n_joints=2, scale=0.0)

    def test_true_model_nominal_matches_dynamics(self):
        nominal = TrueModelNominal(UNIT_RODS)
        rng = np.random.default_rng(5)
        for q, dq in _state_pairs(rng, 10):
            np.testing.assert_allclose(nominal.inertia(q), inertia(UNIT_RODS, q))
            np.testing.assert_allclose(
                nominal.bias(q, dq),
                coriolis(UNIT_RODS, q, dq) @ dq + gravity(UNIT_RODS, q))
            v = rng.uniform(-5, 5, size=2)
            np.testing.assert_allclose(inertia(UNIT_RODS, q) @ nominal.apply_inverse(q, v),
                                       v, atol=1e-12)


class TestModelValidation:
    def test_rejects_wrong_joint_count(self):
        with pytest.raises(ValueError):
            ManipulatorModel(masses=(1.0,), lengths=(1.0,), com_offsets=(0.5,),
                             inertias=(0.1,))

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            ManipulatorModel(masses=(0.0, 1.0))

    def test_state_requires_finite_entries(self):
        with pytest.raises(ValueError):
            RobotState(np.array([np.nan, 0.0]), np.zeros(2))

    def test_state_requires_matching_shapes(self):
        with pytest.raises(ValueError):
            RobotState(np.zeros(2), np.zeros(3))


class TestSimulate:
    def test_equilibrium_stays_at_rest(self):
        # hanging straight down with zero velocity is a fixed point
        initial = RobotState(np.array([-np.pi / 2.0, 0.0]), np.zeros(2))
        trace = simulate(UNIT_RODS, lambda t, s: np.zeros(2), initial, 1.0, 100.0)
        np.testing.assert_allclose(trace.final_state.q, initial.q, atol=1e-9)
        np.testing.assert_allclose(trace.final_state.dq, np.zeros(2), atol=1e-9)

    def test_tick_grid(self):
        initial = RobotState(np.array([-np.pi / 2.0, 0.0]), np.zeros(2))
        trace = simulate(UNIT_RODS, lambda t, s: np.zeros(2), initial, 2.0, 50.0)
        assert trace.n_ticks == 100
        np.testing.assert_allclose(trace.times, np.arange(100) / 50.0)
        assert trace.q.shape == trace.dq.shape == trace.tau.shape == (100, 2)

    def test_gravity_compensation_holds_pose(self):
        q0 = np.array([0.3, 0.5])
        hold = gravity(UNIT_RODS, q0)
        trace = simulate(UNIT_RODS, lambda t, s: hold, RobotState(q0, np.zeros(2)),
                         0.5, 100.0)
        # the pose is a (possibly unstable) equilibrium under constant g(q0)
        np.testing.assert_allclose(trace.final_state.q, q0, atol=1e-6)

    def test_torque_free_energy_conservation(self):
        state = RobotState(np.array([0.4, 0.9]), np.array([1.0, -0.5]))
        e0 = total_energy(UNIT_RODS, state)
        trace = simulate(UNIT_RODS, lambda t, s: np.zeros(2), state, 10.0, 100.0)
        e1 = total_energy(UNIT_RODS, trace.final_state)
        assert abs(e1 - e0) / abs(e0) < 1e-6

    def test_substep_self_convergence(self):
        state = RobotState(np.array([0.4, 0.9]), np.array([1.0, -0.5]))
        t10 = simulate(UNIT_RODS, lambda t, s: np.zeros(2), state, 2.0, 100.0,
                       integrator_substeps=10)
        t20 = simulate(UNIT_RODS, lambda t, s: np.zeros(2), state, 2.0, 100.0,
                       integrator_substeps=20)
        assert np.abs(t10.final_state.q - t20.final_state.q).max() < 1e-6
        assert np.abs(t10.final_state.dq - t20.final_state.dq).max() < 1e-6

    def test_abort_reports_tick_for_nonfinite_torque(self):
        def controller(t, state):
            return np.array([np.nan, 0.0]) if t >= 0.07 else np.zeros(2)

        initial = RobotState(np.array([-np.pi / 2.0, 0.0]), np.zeros(2))
        with pytest.raises(SimulationAborted) as exc:
            simulate(UNIT_RODS, controller, initial, 1.0, 100.0)
        assert exc.value.tick == 7

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_abort_on_divergent_state(self):
        initial = RobotState(np.zeros(2), np.zeros(2))
        with pytest.raises(SimulationAborted):
            simulate(UNIT_RODS, lambda t, s: np.array([1e250, -1e250]),
                     initial, 1.0, 100.0)

    def test_rejects_bad_arguments(self):
        initial = RobotState(np.zeros(2), np.zeros(2))
        with pytest.raises(ValueError):
            simulate(UNIT_RODS, lambda t, s: np.zeros(2), initial, -1.0, 100.0)
        with pytest.raises(ValueError):
            simulate(UNIT_RODS, lambda t, s: np.zeros(2), initial, 1.0, 100.0,
                     integrator_substeps=0)
