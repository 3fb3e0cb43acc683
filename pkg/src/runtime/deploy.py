"""Simulated deployment: policy ticks as position setpoints, minimum-jerk control substeps"""

from dataclasses import dataclass, replace

import numpy as np

from ..chunker.ensemble import EnsembleBuffer, ensemble_step, jerk_metric
from ..config.config import ACTION_DIM, DT, INTERPOLATION_MODES, POLICY_HZ, V_MAX, substeps_per_tick
from ..envsuite import env as envlib
from ..utils.errors import ConfigError, ContractViolation


def _phase(T, t):
    if T <= 0:
        raise ContractViolation(f"Segment duration must be positive, got {T}")
    return min(max(float(t), 0.0), float(T)) / float(T)


def min_jerk(x0, x1, T, t):
    """Rest-to-rest minimum-jerk position x0 + (x1 - x0) (10 s^3 - 15 s^4 + 6 s^5), s = t / T.

    t outside [0, T] is clamped.
    """
    s = _phase(T, t)
    x0, x1 = np.asarray(x0, dtype=np.float64), np.asarray(x1, dtype=np.float64)
    return x0 + (x1 - x0) * (10 * s ** 3 - 15 * s ** 4 + 6 * s ** 5)


def min_jerk_derivatives(x0, x1, T, t):
    """(velocity, acceleration) of the minimum-jerk segment at time t."""
    s = _phase(T, t)
    d = np.asarray(x1, dtype=np.float64) - np.asarray(x0, dtype=np.float64)
    velocity = d * (30 * s ** 2 - 60 * s ** 3 + 30 * s ** 4) / T
    acceleration = d * (60 * s - 180 * s ** 2 + 120 * s ** 3) / T ** 2
    return velocity, acceleration


def interpolate_segment(x0, x1, substeps, period, mode="min_jerk", horizon=None):
    """Controller positions for the substeps of one policy period, ending at t = period

    Args:
        x0: Position at the start of the period
        x1: Setpoint of this period
        substeps: Control substeps per policy tick
        period: Policy period in seconds
        mode: 'min_jerk' or 'zoh' (jump to the setpoint)
        horizon: Minimum-jerk segment duration T (default: one period)

    Returns:
        numpy.ndarray: (substeps, A) commanded positions
    """
    if mode not in INTERPOLATION_MODES:
        raise ConfigError(f"Unknown interpolation '{mode}'. Must be one of {list(INTERPOLATION_MODES)}")
    x1 = np.asarray(x1, dtype=np.float64)
    if mode == "zoh":
        return np.repeat(x1[None], substeps, axis=0)
    T = horizon if horizon else period
    dt = period / substeps
    return np.stack([min_jerk(x0, x1, T, (k + 1) * dt) for k in range(substeps)])


def interpolate_setpoints(start, setpoints, substeps, mode="min_jerk", period=1.0 / POLICY_HZ, horizon=None):
    """Commanded position stream for a sequence of setpoints (each segment starts at the previous setpoint).

    Returns:
        numpy.ndarray: (len(setpoints) * substeps, A)
    """
    previous = np.asarray(start, dtype=np.float64)
    segments = []
    for setpoint in np.asarray(setpoints, dtype=np.float64):
        segments.append(interpolate_segment(previous, setpoint, substeps, period, mode, horizon))
        previous = setpoint
    if not segments:
        return np.zeros((0, len(previous)))
    return np.concatenate(segments)


@dataclass(frozen=True, eq=False)
class DeployResult:
    task_id: int
    seed: int
    success: bool
    ticks: int
    substeps: int
    start: np.ndarray          # (A,) initial agent position
    setpoints: np.ndarray      # (ticks, A) position setpoints, one per policy tick
    commands: np.ndarray       # (ticks * substeps, A) commanded controller positions
    positions: np.ndarray      # (ticks * substeps + 1, 2) realised agent positions
    actions: np.ndarray        # (ticks, A) ensembled policy actions

    @property
    def command_jerk(self):
        return jerk_metric(self.commands)

    @property
    def action_jerk(self):
        return jerk_metric(self.actions)

    def command_jerk_for(self, mode, period=1.0 / POLICY_HZ):
        """Jerk of the same setpoint stream under another interpolation mode."""
        return jerk_metric(interpolate_setpoints(self.start, self.setpoints, self.substeps, mode, period))


def deploy_sim(actor, suite, task_id, seed, policy_hz, ctrl_hz, interpolation="min_jerk", segment_horizon=0.0):
    """One deployment episode in logical time

    Every policy tick produces an ensembled action, read as a position setpoint
    p = clip(x + a * V_MAX * DT). The controller emits ctrl_hz / policy_hz
    intermediate positions toward it and the environment is stepped at the
    control rate with velocity = (position change) / (control period).

    Returns:
        DeployResult
    """
    try:
        substeps = substeps_per_tick(policy_hz, ctrl_hz)
    except ValueError as e:
        raise ConfigError(str(e))
    period = 1.0 / policy_hz
    ctrl_dt = period / substeps

    state, obs = envlib.reset(suite.task(task_id), seed, suite.image_size, suite.views)
    state = replace(state, horizon=state.horizon * substeps)
    start = state.agent_pos.copy()
    actor.begin([state], [obs])
    buffer = EnsembleBuffer(actor.chunk_len, ACTION_DIM, actor.ensemble_m)
    setpoints, commands, actions = [], [], []
    positions = [state.agent_pos.copy()]
    done = success = False
    while not done:
        chunk = actor.predict([0], [state], [obs])[0]
        action, buffer = ensemble_step(buffer, chunk)
        action = np.clip(action, -1.0, 1.0)
        setpoint = np.clip(state.agent_pos + action * V_MAX * DT, 0.0, 1.0)
        segment = interpolate_segment(state.agent_pos, setpoint, substeps, period, interpolation,
                                      segment_horizon or None)
        actions.append(action)
        setpoints.append(setpoint)
        for k, target in enumerate(segment):
            velocity_cmd = (target - state.agent_pos) / (ctrl_dt * V_MAX)
            last = k == substeps - 1
            state, next_obs, success, done = envlib.step(state, velocity_cmd, dt=ctrl_dt, observe_next=last)
            commands.append(target)
            positions.append(state.agent_pos.copy())
            if done:
                break
            if last:
                obs = next_obs
    return DeployResult(
        task_id=task_id,
        seed=seed,
        success=success,
        ticks=len(setpoints),
        substeps=substeps,
        start=start,
        setpoints=np.asarray(setpoints),
        commands=np.asarray(commands),
        positions=np.asarray(positions),
        actions=np.asarray(actions),
    )
