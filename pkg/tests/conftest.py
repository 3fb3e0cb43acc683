"""Shared tiny fixtures: a two-task reach suite at 16px and a small policy config"""

import pytest

from src.config.run_config import EvalConfig, PolicyConfig, TrainConfig
from src.dataio.demos import generate_demos
from src.envsuite.tasks import COLORS, Marker, TaskSpec, TaskSuite

TINY_IMAGE = 16
TINY_GOALS = [("red", (0.2, 0.2)), ("blue", (0.8, 0.8))]


@pytest.fixture(autouse=True)
def quiet_logs(monkeypatch):
    monkeypatch.setenv("TASKCHUNK_QUIET", "1")


def make_tiny_suite(image_size=TINY_IMAGE, views=("scene",)):
    markers = tuple(Marker(pos, COLORS[name]) for name, pos in TINY_GOALS)
    tasks = tuple(
        TaskSpec(
            task_id=i,
            instruction=f"reach the {name} goal",
            family="reach",
            goal=pos,
            tolerance=0.05,
            max_steps=60,
            color=COLORS[name],
            markers=markers,
        )
        for i, (name, pos) in enumerate(TINY_GOALS)
    )
    return TaskSuite(tasks, image_size, tuple(views))


def tiny_policy_config(**overrides):
    values = dict(
        hidden_dim=32,
        cond_dim=16,
        vision_channels=(4, 8, 8, 8),
        layers=1,
        attn_heads=2,
        head_hidden=32,
        mlp_trunk_hidden=64,
        chunk_len=4,
        batch_size=8,
        steps=0,
        num_bins=16,
        gmm_modes=2,
        bet_clusters=4,
        rvq_layers=2,
        rvq_codes=4,
        rvq_latent_dim=8,
        rvq_steps=20,
        rvq_batch_size=32,
        diffusion_steps=8,
        lr=1e-3,
        k_goal=5,
    )
    values.update(overrides)
    return PolicyConfig(**values)


@pytest.fixture(scope="session")
def tiny_suite():
    return make_tiny_suite()


@pytest.fixture(scope="session")
def tiny_demos(tiny_suite):
    return generate_demos(tiny_suite, per_task=2, seed=0)


@pytest.fixture
def tiny_config():
    return tiny_policy_config()


@pytest.fixture
def quick_train():
    """(TrainConfig, EvalConfig) with a single one-rollout evaluation at the end."""
    return TrainConfig(eval_every=0, eval_rollouts=1, log_every=1), EvalConfig(rollouts_per_task=1)
