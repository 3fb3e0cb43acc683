"""Point-mass environment: pure reset/step over immutable states"""

from dataclasses import dataclass, replace
from typing import Dict, Optional

import numpy as np

from .render import render_view
from .tasks import TaskSpec
from ..config.config import (
    AGENT_RADIUS,
    CONTACT_DISTANCE,
    DEFAULT_VIEWS,
    DT,
    IMAGE_SIZE,
    ORBIT_RADIUS,
    V_MAX,
)
from ..nkernel.rng import make_stream
from ..utils.errors import ContractViolation

START_CLEARANCE = 0.1       # agent never starts this close to a reach/sequence target
BLOCK_CLEARANCE = ORBIT_RADIUS + 0.02


@dataclass(frozen=True, eq=False)
class EnvState:
    """Full simulator state; step() never mutates it."""

    task: TaskSpec
    agent_pos: np.ndarray
    agent_vel: np.ndarray
    block_pos: Optional[np.ndarray] = None
    subgoal_index: int = 0
    step_count: int = 0
    horizon: int = 0                 # T in steps (deployment scales it with the control rate)
    push_side: int = 0               # push expert orbit direction: 0 = shortest, +1/-1 fixed
    image_size: int = IMAGE_SIZE
    views: tuple = DEFAULT_VIEWS

    @property
    def proprio(self):
        return np.concatenate([self.agent_pos, self.agent_vel]).astype(np.float32)


@dataclass(frozen=True, eq=False)
class Observation:
    """One image per configured view plus the 4-d proprio vector."""

    views: Dict[str, np.ndarray]
    proprio: np.ndarray

    @property
    def image(self):
        """Image of the first configured view."""
        return next(iter(self.views.values()))


def observe(state):
    return Observation({v: render_view(state, v) for v in state.views}, state.proprio)


def is_success(state):
    """Family predicate: agent (reach), block (push) or ordered visits (sequence) at the goal."""
    task = state.task
    if task.family == "reach":
        return bool(np.linalg.norm(state.agent_pos - np.asarray(task.goal)) <= task.tolerance)
    if task.family == "push":
        return bool(np.linalg.norm(state.block_pos - np.asarray(task.goal)) <= task.tolerance)
    return state.subgoal_index >= len(task.waypoints)


def reset(task, seed, image_size=IMAGE_SIZE, views=DEFAULT_VIEWS, bimodal=False):
    """Seeded initial state: agent uniform in the workspace, block/goals from the task

    Args:
        task: TaskSpec
        seed: Integer seed; same (task, seed) gives a bit-identical observation
        image_size: Rendered image side G
        views: View names to render
        bimodal: Draw a random push orbit direction instead of the shortest one

    Returns:
        tuple: (EnvState, Observation)
    """
    rng = make_stream(seed, "reset", task.task_id)
    block = np.asarray(task.block_start, dtype=np.float64) if task.family == "push" else None
    while True:
        agent = rng.uniform(AGENT_RADIUS, 1.0 - AGENT_RADIUS, size=2)
        if block is not None:
            if np.linalg.norm(agent - block) > BLOCK_CLEARANCE:
                break
        elif all(np.linalg.norm(agent - np.asarray(p)) > START_CLEARANCE for p in task.targets):
            break
    push_side = int(rng.choice([-1, 1])) if (bimodal and block is not None) else 0
    state = EnvState(
        task=task,
        agent_pos=agent,
        agent_vel=np.zeros(2),
        block_pos=block,
        horizon=task.max_steps,
        push_side=push_side,
        image_size=int(image_size),
        views=tuple(views),
    )
    return state, observe(state)


def step(state, action, dt=None, observe_next=True):
    """Advance one step

    Args:
        state: EnvState
        action: 2-vector, clipped to [-1, 1]^2; velocity = action * V_MAX
        dt: Integration step in seconds (default DT; the 100Hz loop passes DT / substeps)
        observe_next: Render the next observation (False returns None to save time)

    Returns:
        tuple: (EnvState, Observation or None, success, done)
    """
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape != (2,) or not np.all(np.isfinite(a)):
        raise ContractViolation(f"Action must be a finite 2-vector, got {action!r}")
    a = np.clip(a, -1.0, 1.0)
    dt = DT if dt is None else float(dt)

    new_pos = np.clip(state.agent_pos + a * V_MAX * dt, 0.0, 1.0)
    displacement = new_pos - state.agent_pos
    block = state.block_pos
    if block is not None:
        # Overlap pushing: the block rides along while the agent moves into it
        overlapping = np.linalg.norm(new_pos - block) < CONTACT_DISTANCE
        if overlapping and float(np.dot(displacement, block - state.agent_pos)) > 0.0:
            block = np.clip(block + displacement, 0.0, 1.0)

    subgoal_index = state.subgoal_index
    task = state.task
    if task.family == "sequence" and subgoal_index < len(task.waypoints):
        if np.linalg.norm(new_pos - np.asarray(task.waypoints[subgoal_index])) <= task.tolerance:
            subgoal_index += 1

    next_state = replace(
        state,
        agent_pos=new_pos,
        agent_vel=displacement / dt,
        block_pos=block,
        subgoal_index=subgoal_index,
        step_count=state.step_count + 1,
    )
    success = is_success(next_state)
    done = success or next_state.step_count >= next_state.horizon
    return next_state, (observe(next_state) if observe_next else None), success, done
