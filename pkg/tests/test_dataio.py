import numpy as np
import pytest

from src.dataio.demo_format import MAGIC, decode_demoset, encode_demoset, git_blob_hash, load_demoset, save_demoset
from src.dataio.demos import DemoSet, TrajectoryRecord, all_chunk_targets, chunk_targets, generate_demos
from src.dataio.sampling import SamplingConfig, sample_batch
from src.nkernel.rng import make_stream
from src.utils.errors import ConfigError, ContractViolation, FormatError


def _record(task_id, length, image_size=4, views=("scene",)):
    actions = np.stack([np.full(2, i / 10.0, dtype=np.float32) for i in range(length)])
    frames = np.stack([np.full((image_size, image_size, 3), i / 100.0, dtype=np.float32) for i in range(length)])
    proprio = np.stack([np.full(4, float(i), dtype=np.float32) for i in range(length)])
    return TrajectoryRecord(task_id, {v: frames.copy() for v in views}, proprio, actions)


def _demoset(*records):
    return DemoSet(tuple(records), {"view_names": ["scene"], "action_dim": 2, "image_size": 4, "suite_hash": "x"})


def test_demo_file_roundtrip(tmp_path, tiny_demos):
    path = save_demoset(tiny_demos, tmp_path / "demos.bin")
    assert path.read_bytes().startswith(MAGIC)
    assert load_demoset(path).equals(tiny_demos)


def test_empty_demo_file(tmp_path):
    empty = _demoset()
    loaded = decode_demoset(encode_demoset(empty))
    assert len(loaded) == 0
    assert loaded.metadata == empty.metadata


def test_demo_file_corruption_is_rejected():
    blob = encode_demoset(_demoset(_record(0, 3), _record(1, 2)))
    with pytest.raises(FormatError):
        decode_demoset(blob[:-1])
    with pytest.raises(FormatError):
        decode_demoset(b"NOTADEMO" + blob[8:])
    flipped = bytearray(blob)
    flipped[40] ^= 0xFF
    with pytest.raises(FormatError):
        decode_demoset(bytes(flipped))
    with pytest.raises(FormatError):
        load_demoset("/nonexistent/demos.bin")


def test_git_blob_hash(tmp_path):
    path = tmp_path / "hello.txt"
    path.write_bytes(b"hello\n")
    assert git_blob_hash(path) == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_generation_is_deterministic(tiny_suite):
    a = generate_demos(tiny_suite, per_task=1, seed=4)
    b = generate_demos(tiny_suite, per_task=1, seed=4)
    assert a.equals(b)
    assert [r.task_id for r in a.records] == [0, 1]


def test_generated_records_end_in_success(tiny_suite, tiny_demos):
    for record in tiny_demos.records:
        task = tiny_suite.task(record.task_id)
        final = record.proprio[-1, :2]
        assert np.linalg.norm(final - np.asarray(task.goal)) <= task.tolerance
        assert np.array_equal(record.actions[-1], np.zeros(2, dtype=np.float32))
        assert np.abs(record.actions).max() <= 1.0


def test_generate_rejects_zero_per_task(tiny_suite):
    with pytest.raises(ContractViolation):
        generate_demos(tiny_suite, per_task=0, seed=0)


def test_record_shape_checks():
    good = _record(0, 3)
    with pytest.raises(ContractViolation):
        TrajectoryRecord(0, good.views, good.proprio[:2], good.actions)
    with pytest.raises(ContractViolation):
        TrajectoryRecord(0, good.views, good.proprio, good.actions * 20.0)


def test_chunk_targets_repeat_last_action():
    record = _record(0, 5)
    targets = chunk_targets(record, 4).reshape(5, 4, 2)
    np.testing.assert_array_equal(targets[3, :, 0], np.array([0.3, 0.4, 0.4, 0.4], dtype=np.float32))
    np.testing.assert_array_equal(targets[0, :, 0], np.array([0.0, 0.1, 0.2, 0.3], dtype=np.float32))
    stacked = all_chunk_targets(_demoset(record, _record(1, 2)), 4)
    assert stacked.shape == (7, 8)
    assert all_chunk_targets(_demoset(), 4).shape == (0, 8)


def test_sample_batch_window_and_padding():
    demos = _demoset(_record(0, 6), _record(1, 4))
    cfg = SamplingConfig(batch_size=32, history=3, chunk_len=2)
    batch = sample_batch(demos, cfg, make_stream(0, "batch"))
    assert batch.proprio.shape == (32, 3, 4)
    assert batch.targets.shape == (32, 3, 4)
    assert batch.views["scene"].shape == (32, 3, 4, 4, 3)
    assert batch.goal_images is None
    for b in range(32):
        t = batch.time_index[b]
        expected_valid = np.arange(t - 2, t + 1) >= 0
        np.testing.assert_array_equal(batch.valid[b], expected_valid)
        steps = np.maximum(np.arange(t - 2, t + 1), 0)
        np.testing.assert_array_equal(batch.proprio[b, :, 0], steps.astype(np.float32))
        # Last window step always targets a_t
        assert batch.targets[b, -1, 0] == pytest.approx(t / 10.0)
        assert batch.task_ids[b] == demos.records[batch.record_index[b]].task_id


def test_sample_batch_single_step_history_is_all_valid():
    demos = _demoset(_record(0, 6))
    batch = sample_batch(demos, SamplingConfig(batch_size=10, history=1, chunk_len=1), make_stream(1, "batch"))
    assert batch.valid.all()
    assert batch.targets.shape == (10, 1, 2)


def test_sample_batch_is_reproducible(tiny_demos):
    cfg = SamplingConfig(batch_size=6, history=2, chunk_len=4, goal_mode="goal_image")
    a = sample_batch(tiny_demos, cfg, make_stream(9, "batch"))
    b = sample_batch(tiny_demos, cfg, make_stream(9, "batch"))
    np.testing.assert_array_equal(a.record_index, b.record_index)
    np.testing.assert_array_equal(a.goal_images, b.goal_images)


def test_goal_image_comes_from_same_task(tiny_demos):
    cfg = SamplingConfig(batch_size=8, history=1, chunk_len=1, goal_mode="goal_image")
    batch = sample_batch(tiny_demos, cfg, make_stream(2, "batch"))
    finals = {
        i: r.views["scene"][-1] for i, r in enumerate(tiny_demos.records)
    }
    for b in range(8):
        task = batch.task_ids[b]
        own = batch.record_index[b]
        partners = [i for i, r in enumerate(tiny_demos.records) if r.task_id == task and i != own]
        assert any(np.array_equal(batch.goal_images[b, 0], finals[i]) for i in partners)


def test_intermediate_goal_clamps_to_final_frame():
    # Two records per task, so the partner is always the other one
    demos = _demoset(_record(0, 5), _record(0, 5))
    cfg = SamplingConfig(batch_size=20, history=1, chunk_len=1, goal_mode="intermediate", k_goal=3)
    batch = sample_batch(demos, cfg, make_stream(3, "batch"))
    for b in range(20):
        t = batch.time_index[b]
        expected = min(t + 3, 4) / 100.0
        assert batch.goal_images[b, 0, 0, 0, 0] == pytest.approx(expected)


def test_single_record_task_is_its_own_goal():
    demos = _demoset(_record(0, 4))
    cfg = SamplingConfig(batch_size=4, history=1, chunk_len=1, goal_mode="goal_image")
    batch = sample_batch(demos, cfg, make_stream(0, "batch"))
    assert batch.goal_images[:, 0, 0, 0, 0] == pytest.approx(np.full(4, 0.03))


def test_sample_batch_errors():
    demos = _demoset(_record(0, 4))
    rng = make_stream(0, "batch")
    with pytest.raises(ConfigError):
        sample_batch(demos, SamplingConfig(4, 1, 2), rng, chunk_dim=6)
    with pytest.raises(ConfigError):
        sample_batch(demos, SamplingConfig(4, 1, 2, goal_mode="video"), rng)
    with pytest.raises(ContractViolation):
        sample_batch(demos, SamplingConfig(4, 0, 2), rng)
    with pytest.raises(ContractViolation):
        sample_batch(_demoset(), SamplingConfig(4, 1, 2), rng)
