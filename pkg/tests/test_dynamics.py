"""Tests for the discrete double-integrator model."""
import numpy as np
import pytest

from covmpc import VehicleState, discretize


class TestDiscretize:
    def test_block_structure(self):
        m = discretize(0.1)
        eye = np.eye(2)
        assert np.allclose(m.A[:2, :2], eye)
        assert np.allclose(m.A[:2, 2:], 0.1 * eye)
        assert np.allclose(m.A[2:, :2], 0.0)
        assert np.allclose(m.A[2:, 2:], eye)
        assert np.allclose(m.B[:2], 0.005 * eye)
        assert np.allclose(m.B[2:], 0.1 * eye)

    def test_unit_period(self):
        m = discretize(1.0)
        assert np.allclose(m.B[:2], 0.5 * np.eye(2))
        assert np.allclose(m.B[2:], np.eye(2))

    def test_rejects_nonpositive_period(self):
        with pytest.raises(ValueError):
            discretize(0.0)
        with pytest.raises(ValueError):
            discretize(-0.1)


class TestStep:
    def test_ballistic_coast(self):
        m = discretize(0.1)
        x = VehicleState([0.0, 0.0], [1.0, 0.0])
        nxt = m.step(x, [0.0, 0.0])
        assert np.allclose(nxt.position, [0.1, 0.0])
        assert np.allclose(nxt.velocity, [1.0, 0.0])

    def test_accelerate_from_rest(self):
        m = discretize(0.1)
        x = VehicleState([0.0, 0.0], [0.0, 0.0])
        nxt = m.step(x, [1.0, 0.0])
        assert np.allclose(nxt.position, [0.005, 0.0])
        assert np.allclose(nxt.velocity, [0.1, 0.0])

    def test_zero_input_at_rest_is_equilibrium(self):
        m = discretize(0.25)
        x = VehicleState([3.0, -2.0], [0.0, 0.0])
        nxt = m.step(x, [0.0, 0.0])
        assert np.array_equal(nxt.position, x.position)
        assert np.array_equal(nxt.velocity, x.velocity)

    def test_matches_matrix_form(self):
        m = discretize(0.3)
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = VehicleState(rng.normal(size=2), rng.normal(size=2))
            u = rng.normal(size=2)
            nxt = m.step(x, u)
            expected = m.A @ x.as_vector() + m.B @ u
            assert np.allclose(nxt.as_vector(), expected, atol=1e-15)


class TestRollout:
    def test_matches_step_composition(self):
        m = discretize(0.1)
        rng = np.random.default_rng(8)
        x0 = VehicleState(rng.normal(size=2), rng.normal(size=2))
        u_seq = rng.normal(size=(12, 2))
        states = m.rollout(x0, u_seq)
        assert len(states) == 13
        cur = x0
        for n, u in enumerate(u_seq):
            cur = m.step(cur, u)
            assert np.allclose(states[n + 1].as_vector(), cur.as_vector(), atol=1e-14)

    def test_array_rollout_matches_object_rollout(self):
        m = discretize(0.2)
        rng = np.random.default_rng(9)
        x0 = VehicleState(rng.normal(size=2), rng.normal(size=2))
        u_seq = rng.normal(size=(9, 2))
        states = m.rollout(x0, u_seq)
        pos, vel = m.rollout_arrays(x0.position, x0.velocity, u_seq)
        assert np.allclose(pos, [s.position for s in states], atol=1e-13)
        assert np.allclose(vel, [s.velocity for s in states], atol=1e-13)

    def test_all_zero_inputs_from_rest_stay_put(self):
        m = discretize(0.1)
        x0 = VehicleState([2.0, 5.0], [0.0, 0.0])
        states = m.rollout(x0, np.zeros((20, 2)))
        for s in states:
            assert np.array_equal(s.position, x0.position)

    def test_superposition(self):
        # The input response is independent of the initial state.
        m = discretize(0.15)
        rng = np.random.default_rng(10)
        u = rng.normal(size=(8, 2))
        v = rng.normal(size=(8, 2))
        for _ in range(5):
            x0 = VehicleState(rng.normal(size=2), rng.normal(size=2))
            pos_uv, _ = m.rollout_arrays(x0.position, x0.velocity, u + v)
            pos_u, _ = m.rollout_arrays(x0.position, x0.velocity, u)
            zero = VehicleState([0.0, 0.0], [0.0, 0.0])
            pos_v0, _ = m.rollout_arrays(zero.position, zero.velocity, v)
            assert np.allclose(pos_uv - pos_u, pos_v0, atol=1e-12)

    def test_velocity_unchanged_under_zero_inputs(self):
        m = discretize(0.1)
        x0 = VehicleState([0.0, 0.0], [1.5, -0.5])
        _, vel = m.rollout_arrays(x0.position, x0.velocity, np.zeros((30, 2)))
        assert np.all(vel == np.array([1.5, -0.5]))

    def test_time_mirror_of_reversed_negated_inputs(self):
        # Reversing the input sequence and negating it replays the
        # velocity profile backwards from the final velocity.
        m = discretize(0.1)
        rng = np.random.default_rng(12)
        u = rng.normal(size=(10, 2))
        _, vel = m.rollout_arrays(np.zeros(2), np.zeros(2), u)
        _, vel_back = m.rollout_arrays(np.zeros(2), vel[-1], -u[::-1])
        assert np.allclose(vel_back, vel[::-1], atol=1e-13)


class TestPositionJacobian:
    def test_one_step_influence(self):
        m = discretize(0.1)
        assert np.allclose(m.position_jacobian(1, 0), 0.005 * np.eye(2))

    def test_two_step_influence(self):
        m = discretize(0.1)
        # A B position block: Ts^2/2 + Ts^2 = 0.015.
        assert np.allclose(m.position_jacobian(2, 0), 0.015 * np.eye(2))
        prod = m.A @ m.B
        assert np.allclose(m.position_jacobian(2, 0), prod[:2])

    def test_causality(self):
        m = discretize(0.1)
        assert np.all(m.position_jacobian(3, 3) == 0.0)
        assert np.all(m.position_jacobian(2, 5) == 0.0)

    def test_rejects_negative_indices(self):
        m = discretize(0.1)
        with pytest.raises(IndexError):
            m.position_coefficient(-1, 0)

    def test_matches_finite_difference_of_rollout(self):
        m = discretize(0.1)
        rng = np.random.default_rng(3)
        u = rng.normal(size=(10, 2))
        x0 = VehicleState(rng.normal(size=2), rng.normal(size=2))
        h = 1e-6
        for target_n in (1, 4, 10):
            for src_m in (0, 3, 9):
                jac = m.position_jacobian(target_n, src_m)
                fd = np.zeros((2, 2))
                for j in range(2):
                    up = u.copy()
                    up[src_m, j] += h
                    um = u.copy()
                    um[src_m, j] -= h
                    pos_p, _ = m.rollout_arrays(x0.position, x0.velocity, up)
                    pos_m, _ = m.rollout_arrays(x0.position, x0.velocity, um)
                    fd[:, j] = (pos_p[target_n] - pos_m[target_n]) / (2 * h)
                assert np.allclose(jac, fd, atol=1e-9)

    def test_coefficient_table_matches_scalars(self):
        m = discretize(0.1)
        table = m.position_coefficients(6)
        for n in range(7):
            for mm in range(6):
                assert table[n, mm] == m.position_coefficient(n, mm)
