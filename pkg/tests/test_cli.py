import json
from dataclasses import asdict, replace

import pandas as pd
import pytest

from src.cli.taskchunk import ablation_grid, apply_axis, comparison_table, deploy_rows, main, run, run_variant
from src.config.run_config import PolicyConfig
from src.dataio.demo_format import save_demoset
from src.dataio.demos import generate_demos
from src.envsuite.tasks import TaskSuite, default_suite, save_suite
from src.runtime import train as train_module
from src.runtime.actors import ExpertActor
from src.runtime.deploy import deploy_sim
from src.utils.config_utils import config_from_dict, parse_config
from src.utils.errors import ConfigError, PrerequisiteError
from tests.conftest import make_tiny_suite, tiny_policy_config


@pytest.fixture
def tiny_config_file(tmp_path):
    suite_path = save_suite(make_tiny_suite(), tmp_path / "suite.json")
    raw = {
        "suite": {"path": str(suite_path), "image_size": 16, "views": ["scene"]},
        "data": {"per_task": 1},
        "policy": asdict(tiny_policy_config()),
        "train": {"eval_every": 0, "eval_rollouts": 1, "log_every": 1},
        "eval": {"rollouts_per_task": 1},
        "deploy": {"episodes_per_task": 1},
        "ablate": {"axes": {"chunking": ["on", "off"]}, "rollouts_per_task": 1},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def test_train_without_demos_names_gen_demos(tmp_path):
    with pytest.raises(PrerequisiteError, match="run gen-demos first"):
        run(["train", "--out-dir", str(tmp_path / "run")])
    with pytest.raises(SystemExit) as info:
        main(["train", "--out-dir", str(tmp_path / "run")])
    assert info.value.code == 1


def test_discrete_head_without_tokenizer_names_fit_tokenizer(tmp_path):
    demos = tmp_path / "demos.bin"
    demos.write_bytes(b"")
    with pytest.raises(PrerequisiteError, match="fit-tokenizer"):
        run(["train", "--demos", str(demos), "--set", "policy.head=bet", "--out-dir", str(tmp_path / "run")])


def test_eval_without_checkpoint_names_train(tmp_path):
    with pytest.raises(PrerequisiteError, match="run train first"):
        run(["eval", "--checkpoint", str(tmp_path / "missing.ckpt"), "--out-dir", str(tmp_path / "eval")])


def test_ablation_grid_expands_axes_and_seeds():
    cfg, _ = parse_config(None, overrides=['ablate.axes={"head": ["mlp", "gmm"]}', "ablate.seeds=[0, 1]",
                                           "ablate.rollouts_per_task=3"], environ={})
    runs = ablation_grid(cfg)
    assert [(v, s) for v, s, _ in runs] == [("head-mlp", 0), ("head-mlp", 1), ("head-gmm", 0), ("head-gmm", 1)]
    for variant, seed, run_cfg in runs:
        assert run_cfg.policy.head == variant.split("-")[1]
        assert run_cfg.policy.seed == seed
        assert run_cfg.eval.seed == seed
        assert run_cfg.eval.rollouts_per_task == 3
        assert run_cfg.train.eval_rollouts == 3


def test_empty_axes_run_the_base_configuration():
    cfg, _ = parse_config(None, environ={})
    runs = ablation_grid(cfg)
    assert [(v, s) for v, s, _ in runs] == [("default", 0)]


def test_apply_axis():
    base = PolicyConfig()
    assert apply_axis(base, "history", "multi", 3).history == 3
    last = apply_axis(base, "history", "last", 3)
    assert last.history == 3 and last.last_step_only
    assert apply_axis(last, "history", "none", 3).history == 1
    assert not apply_axis(base, "chunking", "off", 3).use_chunking
    assert apply_axis(base, "encoder", "separate", 3).separate_encoders
    assert apply_axis(base, "goal", "goal_image", 3).goal_mode == "goal_image"
    with pytest.raises(ConfigError, match="Unknown ablation axis"):
        apply_axis(base, "heads", "mlp", 3)


def test_comparison_table_averages_seeds():
    outcomes = [
        ("head-mlp", 0, {"reach": 1.0, "push": 0.5}, None),
        ("head-mlp", 1, {"reach": 0.5, "push": 0.0}, None),
        ("head-gmm", 0, {"reach": 0.0, "push": 1.0}, None),
        ("head-bet", 0, None, "ConfigError: boom"),
    ]
    table = comparison_table(outcomes, families=("reach", "push"))
    assert list(table.columns) == ["variant", "reach", "push", "mean"]
    assert list(table["variant"]) == ["head-mlp", "head-gmm"]
    row = table.set_index("variant").loc["head-mlp"]
    assert row["reach"] == pytest.approx(0.75)
    assert row["mean"] == pytest.approx(0.5)
    assert comparison_table([]).empty


def test_deploy_rows(tiny_suite):
    result = deploy_sim(ExpertActor(4), tiny_suite, 1, 0, policy_hz=10, ctrl_hz=100)
    lines = deploy_rows([result]).splitlines()
    assert lines[0] == "task_id,seed,success,ticks,substeps,command_jerk,min_jerk_jerk,zoh_jerk"
    assert lines[1].startswith("1,0,1,")
    assert lines[1].split(",")[4] == "10"


def test_end_to_end_commands(tmp_path, tiny_config_file):
    common = ["--config", str(tiny_config_file)]
    demo_dir = tmp_path / "demos"
    assert main(["gen-demos", *common, "--out-dir", str(demo_dir)]) == 0
    demos = demo_dir / "demos.bin"
    for name in ("demos.bin", "suite.json", "preview.png", "manifest.json", "resolved_config.json"):
        assert (demo_dir / name).exists(), name
    manifest = json.loads((demo_dir / "manifest.json").read_text())
    assert manifest["command"] == "gen-demos"
    assert len(manifest["demo_git_hash"]) == 40

    grid = tmp_path / "grid"
    assert main(["ablate", *common, "--demos", str(demos), "--out-dir", str(grid)]) == 0
    comparison = pd.read_csv(grid / "comparison.csv")
    assert list(comparison["variant"]) == ["chunking-on", "chunking-off"]
    assert (grid / "chunking-off" / "seed-0" / "final.ckpt").exists()

    assert main(["report", *common, str(grid)]) == 0
    assert (grid / "summary.csv").exists()
    assert (grid / "learning_curves.svg").exists()

    checkpoint = grid / "chunking-on" / "seed-0" / "final.ckpt"
    for name in ("eval-a", "eval-b"):
        assert main(["eval", *common, "--checkpoint", str(checkpoint), "--out-dir", str(tmp_path / name)]) == 0
    first = (tmp_path / "eval-a" / "metrics.csv").read_text()
    assert first == (tmp_path / "eval-b" / "metrics.csv").read_text()

    deploy_dir = tmp_path / "deploy"
    assert main(["deploy", *common, "--actor", "expert", "--out-dir", str(deploy_dir)]) == 0
    rows = pd.read_csv(deploy_dir / "deploy.csv")
    assert len(rows) == 2
    assert set(rows["substeps"]) == {10}
    assert set(rows["task_id"]) == {0, 1}


def test_ablation_lists_variants_that_fail_with_any_error(tmp_path, tiny_config_file, monkeypatch, capsys):
    common = ["--config", str(tiny_config_file)]
    demo_dir = tmp_path / "demos"
    assert main(["gen-demos", *common, "--out-dir", str(demo_dir)]) == 0
    real_train = train_module.train

    def train_without_chunking_crashes(policy_config, *args, **kwargs):
        if not policy_config.use_chunking:
            raise RuntimeError("conv backward failed")
        return real_train(policy_config, *args, **kwargs)

    monkeypatch.setattr(train_module, "train", train_without_chunking_crashes)
    grid = tmp_path / "grid"
    capsys.readouterr()
    assert main(["ablate", *common, "--demos", str(demo_dir / "demos.bin"), "--out-dir", str(grid)]) == 1
    comparison = pd.read_csv(grid / "comparison.csv")
    assert list(comparison["variant"]) == ["chunking-on"]
    assert "chunking-off seed 0 failed: RuntimeError: conv backward failed" in capsys.readouterr().out


# Slow ablations: three paired seeds per variant on shared demos


def _ablation_table(tmp_path, suite, axes, policy, per_task=10, rollouts=10):
    suite_path = save_suite(suite, tmp_path / "suite.json")
    demo_path = save_demoset(generate_demos(suite, per_task=per_task, seed=0), tmp_path / "demos.bin")
    cfg = config_from_dict({
        "suite": {"path": str(suite_path), "image_size": suite.image_size, "views": list(suite.views)},
        "policy": asdict(policy),
        "train": {"eval_every": 0, "log_every": 500},
        "ablate": {"axes": axes, "seeds": [0, 1, 2], "rollouts_per_task": rollouts},
    })
    outcomes = [
        run_variant((variant, seed, run_cfg.to_dict(), str(demo_path), str(tmp_path / variant / f"seed-{seed}")))
        for variant, seed, run_cfg in ablation_grid(cfg)
    ]
    assert [error for *_, error in outcomes if error is not None] == []
    return comparison_table(outcomes, families=tuple(sorted(set(suite.families().values())))).set_index("variant")


def _push_and_sequence_suite():
    base = default_suite(image_size=32, views=("scene",))
    tasks = [t for t in base.tasks if t.family in ("push", "sequence")]
    return TaskSuite(tuple(replace(t, task_id=i) for i, t in enumerate(tasks)), base.image_size, base.views)


@pytest.mark.slow
def test_chunking_does_not_hurt_push_and_sequence(tmp_path):
    policy = tiny_policy_config(hidden_dim=64, cond_dim=32, head_hidden=64, chunk_len=8, steps=3000, batch_size=32)
    table = _ablation_table(tmp_path, _push_and_sequence_suite(), {"chunking": ["on", "off"]}, policy)
    for family in ("push", "sequence"):
        assert table.loc["chunking-on", family] >= table.loc["chunking-off", family]


@pytest.mark.slow
def test_last_step_only_loss_is_worse_than_multi_step_and_no_history(tmp_path):
    # a short budget, so the variants differ in how much supervision each step gets
    policy = tiny_policy_config(hidden_dim=64, cond_dim=32, head_hidden=64, steps=400, batch_size=16)
    table = _ablation_table(tmp_path, make_tiny_suite(), {"history": ["none", "multi", "last"]}, policy)
    assert table.loc["history-last", "mean"] < table.loc["history-multi", "mean"]
    assert table.loc["history-last", "mean"] < table.loc["history-none", "mean"]


@pytest.mark.slow
def test_goal_modalities_reach_similar_success(tmp_path):
    policy = tiny_policy_config(hidden_dim=64, cond_dim=32, head_hidden=64, steps=1500, batch_size=32)
    table = _ablation_table(tmp_path, make_tiny_suite(), {"goal": ["text", "goal_image", "intermediate"]}, policy)
    assert set(table.index) == {"goal-text", "goal-goal_image", "goal-intermediate"}
    assert table["mean"].max() - table["mean"].min() <= 0.1
