import numpy as np
import pytest

from src.config.config import DT, V_MAX
from src.runtime.actors import ExpertActor
from src.runtime.deploy import (
    deploy_sim,
    interpolate_segment,
    interpolate_setpoints,
    min_jerk,
    min_jerk_derivatives,
)
from src.utils.errors import ConfigError, ContractViolation


def test_min_jerk_boundaries():
    x0, x1 = np.array([0.2, 0.7]), np.array([0.9, 0.1])
    assert np.abs(min_jerk(x0, x1, 2.0, 0.0) - x0).max() <= 1e-9
    assert np.abs(min_jerk(x0, x1, 2.0, 2.0) - x1).max() <= 1e-9
    for t in (0.0, 2.0):
        velocity, acceleration = min_jerk_derivatives(x0, x1, 2.0, t)
        assert np.abs(velocity).max() <= 1e-9
        assert np.abs(acceleration).max() <= 1e-9


def test_min_jerk_midpoint_and_clamping():
    assert float(min_jerk(0.0, 1.0, 1.0, 0.5)) == pytest.approx(0.5)
    assert float(min_jerk(0.0, 1.0, 1.0, 3.0)) == 1.0
    assert float(min_jerk(0.0, 1.0, 1.0, -1.0)) == 0.0
    with pytest.raises(ContractViolation):
        min_jerk(0.0, 1.0, 0.0, 0.5)


def test_min_jerk_coefficients_solve_the_boundary_system():
    # Quintic c0..c5 with x(0)=0, x(1)=1 and zero velocity/acceleration at both ends
    A = np.array([
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [0, 0, 2, 0, 0, 0],
        [1, 1, 1, 1, 1, 1],
        [0, 1, 2, 3, 4, 5],
        [0, 0, 2, 6, 12, 20],
    ], dtype=np.float64)
    b = np.array([0, 0, 0, 1, 0, 0], dtype=np.float64)
    coeffs = np.linalg.solve(A, b)
    assert coeffs[3:] == pytest.approx([10.0, -15.0, 6.0])
    s = np.linspace(0.0, 1.0, 11)
    quintic = sum(c * s ** k for k, c in enumerate(coeffs))
    assert np.allclose([float(min_jerk(0.0, 1.0, 1.0, t)) for t in s], quintic, atol=1e-9)


def test_constant_setpoint_gives_constant_commands():
    start = np.array([0.4, 0.4])
    commands = interpolate_setpoints(start, [start, start, start], substeps=10, period=0.1)
    assert commands.shape == (30, 2)
    assert np.allclose(commands, start)


def test_segment_substeps_end_at_setpoint():
    segment = interpolate_segment(np.zeros(2), np.ones(2), substeps=10, period=0.1)
    assert segment.shape == (10, 2)
    assert np.allclose(segment[-1], 1.0)
    assert np.all(np.diff(segment[:, 0]) >= 0)
    zoh = interpolate_segment(np.zeros(2), np.ones(2), substeps=10, period=0.1, mode="zoh")
    assert np.array_equal(zoh, np.ones((10, 2)))
    with pytest.raises(ConfigError):
        interpolate_segment(np.zeros(2), np.ones(2), 10, 0.1, mode="cubic")


def test_min_jerk_velocity_respects_the_speed_limit():
    # Setpoint one full-speed step away: the segment's peak speed is 1.875 * average speed
    period = 0.1
    x1 = np.array([V_MAX * DT, 0.0])
    peak = max(abs(min_jerk_derivatives(np.zeros(2), x1, period, t)[0][0]) for t in np.linspace(0.0, period, 101))
    assert peak <= V_MAX


def test_deploy_rejects_non_multiple_rates(tiny_suite):
    with pytest.raises(ConfigError):
        deploy_sim(ExpertActor(4), tiny_suite, 0, 0, policy_hz=10, ctrl_hz=95)


def test_deploy_episode_layout(tiny_suite):
    result = deploy_sim(ExpertActor(4), tiny_suite, task_id=1, seed=0, policy_hz=10, ctrl_hz=100)
    assert result.substeps == 10
    assert result.success
    assert result.setpoints.shape == (result.ticks, 2)
    assert result.actions.shape == (result.ticks, 2)
    assert len(result.commands) <= result.ticks * 10
    assert len(result.positions) == len(result.commands) + 1
    assert np.all((result.setpoints >= 0.0) & (result.setpoints <= 1.0))


def test_min_jerk_commands_are_smoother_than_zero_order_hold(tiny_suite):
    min_jerk_total = zoh_total = 0.0
    for episode in range(20):
        task_id = episode % 2
        result = deploy_sim(ExpertActor(4), tiny_suite, task_id, seed=episode, policy_hz=10, ctrl_hz=100)
        min_jerk_total += result.command_jerk
        zoh_total += result.command_jerk_for("zoh", period=0.1)
    assert min_jerk_total < zoh_total
