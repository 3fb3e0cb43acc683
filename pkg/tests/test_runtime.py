from dataclasses import replace

import numpy as np
import pytest
import torch

from src.config.run_config import EvalConfig, TrainConfig
from src.chunker.executor import ensembled_exec, reset_batch
from src.dataio.demos import DemoSet, demo_metadata, generate_demos, rollout_expert
from src.dataio.sampling import SamplingConfig, sample_batch
from src.envsuite.tasks import TaskSuite
from src.heads.factory import needs_tokenizer
from src.heads.kmeans import ActionCodebook
from src.heads.rvq import RVQTokenizer
from src.nkernel.gradcheck import grad_check_parameters
from src.nkernel.rng import make_stream, torch_generator
from src.policy.policy import ChunkPolicy
from src.runtime.actors import PolicyActor
from src.runtime.checkpoints import load_policy, save_policy
from src.runtime.evaluate import episode_seeds, evaluate
from src.runtime.losses import multi_step_loss
from src.runtime.metrics import MetricsTable
from src.runtime.tokenizer import fit_tokenizer, load_tokenizer, save_tokenizer
from src.runtime.train import train
from src.trunk.tokens import TrunkOutput
from src.utils.errors import ConfigError, ContractViolation, LoadError, ReportError
from tests.conftest import make_tiny_suite, tiny_policy_config


class _ValueHead:
    """Per-item loss equal to the first target entry."""

    def loss(self, feature, target, reduction="none", generator=None):
        return target[:, 0]


def _window_output(h=3):
    return TrunkOutput(features=torch.zeros(1, h, 4), step_index=tuple(range(h)))


def test_multi_step_loss_averages_valid_steps():
    targets = torch.tensor([[[1.0], [2.0], [3.0]]])
    valid = torch.ones(1, 3, dtype=torch.bool)
    assert float(multi_step_loss(_window_output(), targets, valid, _ValueHead())) == 2.0
    assert float(multi_step_loss(_window_output(), targets, valid, _ValueHead(), last_step_only=True)) == 3.0
    partly = torch.tensor([[False, True, True]])
    assert float(multi_step_loss(_window_output(), targets, partly, _ValueHead())) == 2.5


def test_multi_step_loss_errors():
    targets = torch.tensor([[[1.0], [2.0], [3.0]]])
    with pytest.raises(ContractViolation):
        multi_step_loss(_window_output(), targets, torch.zeros(1, 3, dtype=torch.bool), _ValueHead())
    with pytest.raises(ContractViolation):
        multi_step_loss(_window_output(4), targets, torch.ones(1, 3, dtype=torch.bool), _ValueHead())


def test_zero_steps_returns_the_initial_policy(tiny_suite, tiny_demos, tiny_config, quick_train):
    result = train(tiny_config, tiny_demos, tiny_suite, None, *quick_train)
    fresh = ChunkPolicy(tiny_config, tiny_suite.views, tiny_suite.image_size, len(tiny_suite))
    for name, tensor in fresh.state_dict().items():
        assert torch.equal(result.policy.state_dict()[name], tensor), name
    assert result.store.step == 0
    assert result.metrics.final_step == 0
    assert set(result.metrics.success_by_task()) == {0, 1}


def test_training_is_reproducible(tmp_path, tiny_suite, tiny_demos, tiny_config, quick_train):
    config = replace(tiny_config, steps=3, history=2)
    a = train(config, tiny_demos, tiny_suite, tmp_path / "a", *quick_train)
    b = train(config, tiny_demos, tiny_suite, tmp_path / "b", *quick_train)
    assert a.final_path.read_bytes() == b.final_path.read_bytes()
    assert (tmp_path / "a" / "metrics.csv").read_text() == (tmp_path / "b" / "metrics.csv").read_text()
    assert a.best_path is not None and a.best_path.exists()
    assert a.store.step == 3


def test_checkpoint_restores_policy_and_evaluation(tmp_path, tiny_suite, tiny_demos, tiny_config, quick_train):
    result = train(replace(tiny_config, steps=2), tiny_demos, tiny_suite, tmp_path, *quick_train)
    policy, ckpt, suite = load_policy(result.final_path, suite=tiny_suite)
    assert ckpt.step == 2
    assert suite is tiny_suite
    for name, tensor in result.policy.state_dict().items():
        assert torch.equal(policy.state_dict()[name], tensor)

    direct = evaluate(PolicyActor(result.policy), tiny_suite, rollouts_per_task=2, seed=4, step=2)
    restored = evaluate(result.final_path, tiny_suite, rollouts_per_task=2, seed=4, step=2)
    assert direct.success_by_task() == restored.success_by_task()


def test_checkpoint_without_optimizer_state(tmp_path, tiny_suite, tiny_config):
    policy = ChunkPolicy(tiny_config, tiny_suite.views, tiny_suite.image_size, len(tiny_suite))
    path = save_policy(tmp_path / "plain.ckpt", policy, tiny_suite)
    _, ckpt, stored_suite = load_policy(path)
    assert ckpt.step == 0
    assert stored_suite == tiny_suite


def test_checkpoint_mismatches_raise_load_error(tmp_path, tiny_suite, tiny_config):
    policy = ChunkPolicy(tiny_config, tiny_suite.views, tiny_suite.image_size, len(tiny_suite))
    path = save_policy(tmp_path / "p.ckpt", policy, tiny_suite)
    with pytest.raises(LoadError):
        load_policy(path, suite=make_tiny_suite(image_size=20))
    with pytest.raises(LoadError):
        load_policy(path, policy_config=replace(tiny_config, chunk_len=2))


def test_evaluation_is_deterministic(tiny_suite, tiny_config):
    policy = ChunkPolicy(tiny_config, tiny_suite.views, tiny_suite.image_size, len(tiny_suite))
    a = evaluate(PolicyActor(policy), tiny_suite, rollouts_per_task=2, seed=1, verbose=False)
    b = evaluate(PolicyActor(policy), tiny_suite, rollouts_per_task=2, seed=1, verbose=False)
    assert a.to_csv_text() == b.to_csv_text()
    assert episode_seeds(1, 0, 3) == episode_seeds(1, 0, 3)
    assert episode_seeds(1, 0, 3) != episode_seeds(1, 1, 3)


def test_image_goal_actor_needs_demos(tiny_suite, tiny_config):
    policy = ChunkPolicy(replace(tiny_config, goal_mode="goal_image"), tiny_suite.views, tiny_suite.image_size,
                         len(tiny_suite))
    with pytest.raises(ContractViolation):
        PolicyActor(policy)


def test_image_goal_policy_trains_and_evaluates(tiny_suite, tiny_demos, tiny_config, quick_train):
    config = replace(tiny_config, goal_mode="intermediate", steps=2, history=2)
    result = train(config, tiny_demos, tiny_suite, None, *quick_train)
    assert set(result.metrics.success_by_task()) == {0, 1}


def test_metrics_csv_roundtrip_and_errors(tmp_path):
    table = MetricsTable()
    table.add(100, 0, 0.25, 0.5, 0)
    table.add(100, 1, 0.25, 1.0, 0)
    table.add(200, 0, float("nan"), 0.75, 0)
    path = table.write_csv(tmp_path / "metrics.csv")
    loaded = MetricsTable.from_csv(path)
    assert loaded.final_step == 200
    assert loaded.success_by_task(100) == {0: 0.5, 1: 1.0}
    assert loaded.mean_success(100) == pytest.approx(0.75)
    assert loaded.family_success({0: "reach", 1: "push"}, step=100) == {"reach": 0.5, "push": 1.0}

    bad = tmp_path / "bad.csv"
    bad.write_text("step,task_id,loss,success_rate,seed\n1,0,0.1,0.5,0\n1,zero,0.1,0.5,0\n")
    with pytest.raises(ReportError, match="bad.csv:3"):
        MetricsTable.from_csv(bad)
    bad.write_text("step,task_id,loss,success_rate,seed\n1,0,0.1,1.5,0\n")
    with pytest.raises(ReportError, match="bad.csv:2"):
        MetricsTable.from_csv(bad)
    with pytest.raises(ReportError):
        MetricsTable.from_csv(tmp_path / "missing.csv")


def test_kmeans_tokenizer_fit_save_load(tmp_path, tiny_demos, tiny_config):
    config = replace(tiny_config, head="bet")
    codebook = fit_tokenizer(config, tiny_demos)
    assert isinstance(codebook, ActionCodebook)
    assert codebook.centroids.shape == (config.bet_clusters, config.chunk_dim())
    path = save_tokenizer(tmp_path / "tok.ckpt", codebook, config)
    loaded = load_tokenizer(path, config)
    assert np.array_equal(loaded.centroids, codebook.centroids)
    with pytest.raises(LoadError):
        load_tokenizer(path, replace(config, bet_clusters=3))
    with pytest.raises(LoadError):
        load_tokenizer(path, replace(config, head="vqbet"))


def test_rvq_tokenizer_fit_save_load(tmp_path, tiny_demos, tiny_config):
    config = replace(tiny_config, head="vqbet")
    tokenizer = fit_tokenizer(config, tiny_demos)
    assert isinstance(tokenizer, RVQTokenizer) and bool(tokenizer.fitted)
    loaded = load_tokenizer(save_tokenizer(tmp_path / "tok.ckpt", tokenizer, config), config)
    assert bool(loaded.fitted)
    assert torch.equal(loaded.codebooks, tokenizer.codebooks)


def test_tokenizer_is_only_for_discrete_heads(tiny_demos, tiny_config):
    with pytest.raises(ConfigError):
        fit_tokenizer(tiny_config, tiny_demos)


def test_bet_policy_trains_with_codebook(tiny_suite, tiny_demos, tiny_config, quick_train):
    config = replace(tiny_config, head="bet", steps=2)
    result = train(config, tiny_demos, tiny_suite, None, *quick_train, tokenizer=fit_tokenizer(config, tiny_demos))
    assert result.store.step == 2


def test_demos_must_match_suite_rendering(tiny_demos, tiny_config, quick_train):
    with pytest.raises(ContractViolation):
        train(tiny_config, tiny_demos, make_tiny_suite(image_size=20), None, *quick_train)


@pytest.fixture(scope="module")
def trained_benchmark(tiny_suite):
    demos = generate_demos(tiny_suite, per_task=10, seed=1)
    config = tiny_policy_config(hidden_dim=64, cond_dim=32, head_hidden=64, steps=1500, batch_size=32)
    return train(config, demos, tiny_suite, None, TrainConfig(eval_every=0, eval_rollouts=10, log_every=500),
                 EvalConfig(rollouts_per_task=10))


@pytest.mark.slow
def test_trained_policy_solves_tiny_suite(trained_benchmark):
    assert trained_benchmark.metrics.mean_success() >= 0.9


@pytest.mark.slow
def test_zeroed_goal_hurts_success(trained_benchmark, tiny_suite):
    actor = PolicyActor(trained_benchmark.policy, zero_goal=True)
    ablated = evaluate(actor, tiny_suite, rollouts_per_task=10, seed=0, verbose=False)
    assert ablated.mean_success() < trained_benchmark.metrics.mean_success()


@pytest.mark.parametrize("seed", range(5))
def test_policy_loss_gradients(tiny_suite, tiny_demos, seed):
    config = tiny_policy_config(batch_size=4, history=2, seed=seed)
    policy = ChunkPolicy(config, tiny_suite.views, tiny_suite.image_size, len(tiny_suite))
    batch = sample_batch(tiny_demos, SamplingConfig.from_policy(config), make_stream(seed, "batch", 1), policy.chunk_dim)

    def loss(m):
        return m.loss(batch, generator=torch_generator(seed, "head", 1))

    errors = grad_check_parameters(policy, loss, coords_per_tensor=2, seed=seed)
    assert any(name.startswith("encoders.") for name in errors)
    assert any(name.startswith("trunk.") for name in errors)
    assert any(name.startswith("head.") for name in errors)
    assert max(errors.values()) <= 1e-3


REPLAY_SEED = 11


@pytest.mark.slow
@pytest.mark.parametrize("head", ["mlp", "bins", "gmm", "bet", "vqbet", "diffusion"])
def test_policy_memorizing_one_demo_replays_it(tiny_suite, head):
    suite = TaskSuite(tiny_suite.tasks[:1], tiny_suite.image_size, tiny_suite.views)
    record, expert_success = rollout_expert(suite.task(0), REPLAY_SEED, suite.image_size, suite.views)
    assert expert_success
    demos = DemoSet((record,), demo_metadata(suite))
    config = tiny_policy_config(head=head, steps=1500, batch_size=16)
    tokenizer = fit_tokenizer(config, demos) if needs_tokenizer(head) else None
    result = train(config, demos, suite, None, TrainConfig(eval_every=0, eval_rollouts=1, log_every=500),
                   EvalConfig(rollouts_per_task=1), tokenizer=tokenizer)

    actor = PolicyActor(result.policy)
    states, observations = reset_batch(suite, 0, [REPLAY_SEED])
    [episode] = ensembled_exec(actor, states, observations, [REPLAY_SEED], actor.chunk_len, actor.ensemble_m)
    assert episode.success
