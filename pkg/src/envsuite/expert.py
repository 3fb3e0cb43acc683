"""Scripted experts: proportional control toward a task-dependent subgoal"""

import math
from dataclasses import replace

import numpy as np

from ..config.config import CONTACT_DISTANCE, KP, ORBIT_RADIUS

CONTACT_SLACK = 0.01           # distance beyond contact still treated as touching
ORBIT_BAND = 0.04              # radial slack around the orbit circle
PUSH_CONE = math.radians(45)   # max angle off the push line while carrying the block
ALIGN_CONE = math.radians(25)  # alignment needed before moving in to touch the block
ORBIT_STEP = math.radians(45)  # how far ahead on the orbit each subgoal sits
INSET = 0.7                    # move-in target depth, as a fraction of contact distance


def _rotate(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def _signed_angle(frm, to):
    return math.atan2(frm[0] * to[1] - frm[1] * to[0], float(np.dot(frm, to)))


def push_subgoal(agent, block, goal, push_side=0):
    """Subgoal for the push expert (stateless: depends only on positions).

    Phases, decided from the agent's angle around the block relative to the
    push line: carry (touching, behind the block), back off (touching from the
    wrong side), move in (aligned on the orbit), approach (far away), orbit
    (on the circle, rotating toward the side opposite the goal).
    """
    agent, block, goal = (np.asarray(p, dtype=np.float64) for p in (agent, block, goal))
    to_goal = goal - block
    if np.linalg.norm(to_goal) < 1e-9:
        return agent
    behind = -to_goal / np.linalg.norm(to_goal)
    rel = agent - block
    dist = float(np.linalg.norm(rel))
    rel_unit = rel / dist if dist > 1e-9 else behind
    delta = _signed_angle(rel_unit, behind)

    if dist <= CONTACT_DISTANCE + CONTACT_SLACK:
        if abs(delta) < PUSH_CONE:
            # Moving by (goal - block) keeps the offset, so the block lands on the goal
            return goal + rel
        return block + rel_unit * ORBIT_RADIUS
    if abs(delta) < ALIGN_CONE and dist <= ORBIT_RADIUS + ORBIT_BAND:
        return block + rel_unit * (INSET * CONTACT_DISTANCE)
    if dist > ORBIT_RADIUS + ORBIT_BAND:
        return block + rel_unit * ORBIT_RADIUS

    if push_side == 0:
        direction = 1.0 if delta >= 0 else -1.0
        remaining = abs(delta)
    else:
        direction = float(push_side)
        remaining = abs(delta) if direction * delta >= 0 else 2 * math.pi - abs(delta)
    return block + ORBIT_RADIUS * _rotate(rel_unit, direction * min(ORBIT_STEP, remaining))


def current_subgoal(state):
    """Point the expert steers toward in the given state."""
    task = state.task
    if task.family == "push":
        return push_subgoal(state.agent_pos, state.block_pos, task.goal, state.push_side)
    if task.family == "sequence":
        index = min(state.subgoal_index, len(task.waypoints) - 1)
        return np.asarray(task.waypoints[index], dtype=np.float64)
    return np.asarray(task.goal, dtype=np.float64)


def expert_action(state, task=None, noise_std=0.0, rng=None):
    """clip(k_p * (subgoal - agent_position), [-1, 1])

    Args:
        state: EnvState
        task: TaskSpec (defaults to the task carried by the state)
        noise_std: Optional Gaussian noise added before clipping
        rng: numpy Generator, required when noise_std > 0

    Returns:
        numpy.ndarray: 2-vector action
    """
    if task is not None and task is not state.task:
        state = replace(state, task=task)
    action = KP * (current_subgoal(state) - state.agent_pos)
    if noise_std > 0.0:
        action = action + rng.normal(0.0, noise_std, size=2)
    return np.clip(action, -1.0, 1.0)
