import math

import numpy as np
import pytest

from src.chunker.ensemble import EnsembleBuffer, ensemble_step, ensemble_weights, jerk_metric
from src.chunker.executor import ensembled_exec, naive_chunk_exec, reset_batch
from src.envsuite.tasks import default_suite
from src.nkernel.rng import make_stream
from src.runtime.actors import ExpertActor, RandomActor
from src.utils.errors import ContractViolation


def test_single_entry_returns_raw_candidate():
    action, buffer = ensemble_step(EnsembleBuffer(3, 2, m=0.5), [0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert action.tolist() == [0.1, 0.2]
    assert len(buffer) == 1


def test_zero_m_averages_candidates():
    buffer = EnsembleBuffer(2, 1, m=0.0)
    _, buffer = ensemble_step(buffer, [9.0, 1.0])
    action, _ = ensemble_step(buffer, [3.0, 7.0])
    assert float(action[0]) == pytest.approx(2.0)


def test_weights_favour_the_oldest_candidate():
    weights = ensemble_weights(3, 0.1)
    assert weights[0] == 1.0
    assert weights[2] == pytest.approx(math.exp(-0.2))


def test_three_overlapping_chunks():
    x = 100.0
    buffer = EnsembleBuffer(3, 1, m=0.1)
    _, buffer = ensemble_step(buffer, [x, x, 1.0])
    _, buffer = ensemble_step(buffer, [x, 2.0, x])
    action, buffer = ensemble_step(buffer, [4.0, x, x])
    assert float(action[0]) == pytest.approx(2.2340, abs=1e-4)
    assert len(buffer) == 3


def test_ensembled_action_stays_within_candidate_range():
    rng = make_stream(0, "ensemble")
    for _ in range(1000):
        H = int(rng.integers(1, 6))
        buffer = EnsembleBuffer(H, 2, m=float(rng.uniform(0.0, 2.0)))
        steps = int(rng.integers(1, 10))
        for _ in range(steps):
            chunk = rng.uniform(-1.0, 1.0, size=H * 2)
            action, buffer = ensemble_step(buffer, chunk)
            candidates = np.stack([c[age] for c, age in buffer.entries])
            assert np.all(action >= candidates.min(axis=0) - 1e-12)
            assert np.all(action <= candidates.max(axis=0) + 1e-12)
            assert len(buffer) <= H
            assert all(0 <= age < H for _, age in buffer.entries)


def test_ensemble_contract_checks():
    with pytest.raises(ContractViolation):
        EnsembleBuffer(0, 2)
    with pytest.raises(ContractViolation):
        EnsembleBuffer(2, 2, m=-1.0)
    with pytest.raises(ContractViolation):
        ensemble_step(EnsembleBuffer(2, 2), [0.0, 0.0, 0.0])


def test_jerk_metric():
    assert jerk_metric([0.0, 1.0, 4.0, 9.0]) == pytest.approx(2.0)
    assert jerk_metric([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]) == 0.0
    assert jerk_metric([1.0, 2.0]) == 0.0


def test_random_actor_is_seeded():
    a = RandomActor(4, seed=3).predict([0, 1], [None, None], [None, None])
    b = RandomActor(4, seed=3).predict([0, 1], [None, None], [None, None])
    assert a.shape == (2, 8)
    assert np.array_equal(a, b)
    assert np.abs(a).max() <= 1.0


def test_ensembled_expert_solves_reach_tasks():
    suite = default_suite()
    actor = ExpertActor(chunk_len=4)
    for task_id in (0, 3):
        seeds = list(range(5))
        states, observations = reset_batch(suite, task_id, seeds)
        results = ensembled_exec(actor, states, observations, seeds, chunk_len=4, m=0.1)
        assert [r.seed for r in results] == seeds
        assert all(r.success for r in results)
        for r in results:
            assert r.actions.shape == (r.steps, 2)
            assert r.positions.shape == (r.steps + 1, 2)


def test_naive_expert_solves_reach_tasks():
    suite = default_suite()
    seeds = [0, 1, 2]
    states, observations = reset_batch(suite, 1, seeds)
    results = naive_chunk_exec(ExpertActor(chunk_len=4), states, observations, seeds, chunk_len=4)
    assert all(r.success for r in results)


def test_random_actor_rarely_pushes_the_block():
    suite = default_suite(image_size=16, views=("scene",))
    seeds = list(range(5))
    states, observations = reset_batch(suite, 4, seeds)
    results = ensembled_exec(RandomActor(4, seed=0), states, observations, seeds, chunk_len=4, m=0.1)
    assert sum(r.success for r in results) / len(results) <= 0.2


def test_naive_single_step_chunks_match_ensembled_execution(tiny_suite):
    seeds = [0, 1]
    states, observations = reset_batch(tiny_suite, 0, seeds)
    ensembled = ensembled_exec(RandomActor(1, seed=7), states, observations, seeds, chunk_len=1, m=0.1)
    naive = naive_chunk_exec(RandomActor(1, seed=7), states, observations, seeds, chunk_len=1)
    for a, b in zip(ensembled, naive):
        assert a.steps == b.steps
        assert np.array_equal(a.actions, b.actions)
        assert np.array_equal(a.positions, b.positions)
    with pytest.raises(ContractViolation):
        naive_chunk_exec(RandomActor(1), states, observations, seeds, chunk_len=0)


def test_naive_execution_is_jerkier_than_ensembled_on_push_tasks():
    suite = default_suite(image_size=16, views=("scene",))
    naive, ensembled = [], []
    for task_id in (4, 5):
        seeds = list(range(10 * task_id, 10 * task_id + 10))
        states, observations = reset_batch(suite, task_id, seeds)
        runs = naive_chunk_exec(RandomActor(4, seed=task_id), states, observations, seeds, chunk_len=4)
        naive += [jerk_metric(r.actions) for r in runs]
        runs = ensembled_exec(RandomActor(4, seed=task_id), states, observations, seeds, chunk_len=4, m=0.01)
        ensembled += [jerk_metric(r.actions) for r in runs]
    assert len(naive) == len(ensembled) == 20
    assert np.mean(naive) >= np.mean(ensembled)
