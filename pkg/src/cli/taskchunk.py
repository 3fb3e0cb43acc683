"""
Multi-task chunking policy toolkit
Generates expert demonstrations, fits action tokenizers, trains and evaluates
policies, runs the simulated 10Hz/100Hz deployment loop, ablation grids and reports.
"""

import argparse
import csv
import io
import itertools
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

# Relative imports for package structure
from ..cleanup.cleanup_utils import atomic_write_bytes, write_json
from ..config.config import (
    ABLATION_AXES,
    DEMO_FILENAME,
    MANIFEST_FILENAME,
    METRICS_FILENAME,
    RESOLVED_CONFIG_FILENAME,
    SUITE_FILENAME,
    TASK_FAMILIES,
    TOKENIZER_FILENAME,
)
from ..utils.cli_utils import common_options_parser, resolve_common_options
from ..utils.error_handler import handle_error
from ..utils.errors import ConfigError, PrerequisiteError, TaskchunkError
from ..utils.log_utils import log_info, log_progress, log_success, log_warning

PREVIEW_FILENAME = "preview.png"
DEPLOY_FILENAME = "deploy.csv"
COMPARISON_FILENAME = "comparison.csv"
DEPLOY_HEADER = ("task_id", "seed", "success", "ticks", "substeps", "command_jerk", "min_jerk_jerk", "zoh_jerk")


def build_parser():
    common = common_options_parser()
    parser = argparse.ArgumentParser(
        prog="taskchunk",
        description="Multi-task imitation learning with action chunking on a point-mass benchmark",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Expert demonstrations for the built-in 8-task suite
  ./run.sh gen-demos --out-dir output/demos

  # Train the default policy (transformer trunk, MLP head, H=10)
  ./run.sh train --demos output/demos/demos.bin --out-dir output/run

  # BeT head: fit the k-means codebook first
  ./run.sh fit-tokenizer --demos output/demos/demos.bin --set policy.head=bet --out-dir output/tok
  ./run.sh train --demos output/demos/demos.bin --tokenizer output/tok/tokenizer.ckpt --set policy.head=bet

  # Evaluate and deploy a checkpoint
  ./run.sh eval --checkpoint output/run/final.ckpt --seed 1
  ./run.sh deploy --checkpoint output/run/final.ckpt

  # Ablation grid from a config with ablate.axes, then the report
  ./run.sh ablate --config ablate.json --demos output/demos/demos.bin --out-dir output/grid
  ./run.sh report output/grid
        """,
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    sub.add_parser("gen-demos", parents=[common], help="Roll scripted experts into demos.bin")

    p = sub.add_parser("fit-tokenizer", parents=[common], help="Fit the BeT / VQ-BeT action tokenizer")
    p.add_argument("--demos", help="Demo file (default: data.demo_path)")

    p = sub.add_parser("train", parents=[common], help="Train a policy")
    p.add_argument("--demos", help="Demo file (default: data.demo_path)")
    p.add_argument("--tokenizer", help="Tokenizer checkpoint for the bet / vqbet heads")

    p = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint over seeded resets")
    p.add_argument("--checkpoint", required=True, help="Policy checkpoint (final.ckpt / best.ckpt)")
    p.add_argument("--demos", help="Demo file supplying goal images (image goal modes)")

    p = sub.add_parser("deploy", parents=[common], help="Simulated deployment with min-jerk substeps")
    p.add_argument("--checkpoint", help="Policy checkpoint (required unless --actor expert)")
    p.add_argument("--actor", choices=["policy", "expert"], default="policy", help="Chunk source (default: policy)")
    p.add_argument("--demos", help="Demo file supplying goal images (image goal modes)")

    p = sub.add_parser("ablate", parents=[common], help="Train and evaluate every variant of ablate.axes")
    p.add_argument("--demos", help="Demo file shared by every variant (default: data.demo_path)")

    p = sub.add_parser("report", parents=[common], help="Summary CSV and learning curves from metrics files")
    p.add_argument("metrics_dir", help="Directory searched recursively for metrics.csv")
    return parser


def _demo_path(parsed, cfg):
    path = getattr(parsed, "demos", None) or cfg.data.demo_path
    if not path:
        raise PrerequisiteError("No demo file given (--demos or data.demo_path)", "gen-demos")
    path = Path(path)
    if not path.exists():
        raise PrerequisiteError(f"Demo file not found: {path}", "gen-demos")
    return path


def _load_demos(path):
    from ..dataio.demo_format import load_demoset
    demos = load_demoset(path)
    log_info(f"Loaded {len(demos)} demonstrations from {path}")
    return demos


def write_run_files(out_dir, command, cfg, suite, demo_path=None, argv=None, seed=None):
    """resolved_config.json and manifest.json, which together make a run directory self-describing."""
    from ..dataio.demo_format import git_blob_hash
    from ..envsuite.tasks import suite_hash

    write_json(out_dir / RESOLVED_CONFIG_FILENAME, cfg.to_dict())
    manifest = {
        "command": command,
        "seed": cfg.policy.seed if seed is None else seed,
        "suite_hash": suite_hash(suite),
        "demo_file": str(demo_path) if demo_path else None,
        "demo_git_hash": git_blob_hash(demo_path) if demo_path else None,
        "argv": list(argv) if argv is not None else None,
    }
    return write_json(out_dir / MANIFEST_FILENAME, manifest)


def _handle_gen_demos(parsed, cfg, out_dir, argv):
    from ..dataio.demo_format import save_demoset
    from ..dataio.demos import generate_demos
    from ..envsuite.tasks import save_suite, suite_from_config
    from ..report.preview import save_preview

    suite = suite_from_config(cfg.suite)
    data = cfg.data
    log_info(f"Generating {data.per_task} demos for each of {len(suite)} tasks (seed {data.seed})")
    demos = generate_demos(suite, data.per_task, data.seed, data.noise_std, data.bimodal, data.max_retries)
    demo_path = save_demoset(demos, out_dir / DEMO_FILENAME)
    save_suite(suite, out_dir / SUITE_FILENAME)
    save_preview(suite, demos, out_dir / PREVIEW_FILENAME)
    write_run_files(out_dir, "gen-demos", cfg, suite, demo_path, argv, seed=data.seed)
    log_success(f"✓ {len(demos)} demonstrations saved: {demo_path}")
    return 0


def _handle_fit_tokenizer(parsed, cfg, out_dir, argv):
    from ..envsuite.tasks import suite_from_config
    from ..runtime.tokenizer import fit_tokenizer, save_tokenizer

    demo_path = _demo_path(parsed, cfg)
    demos = _load_demos(demo_path)
    suite = suite_from_config(cfg.suite)
    tokenizer = fit_tokenizer(cfg.policy, demos)
    path = save_tokenizer(out_dir / TOKENIZER_FILENAME, tokenizer, cfg.policy)
    write_run_files(out_dir, "fit-tokenizer", cfg, suite, demo_path, argv)
    log_success(f"✓ Tokenizer saved: {path}")
    return 0


def _tokenizer_for(policy_config, tokenizer_path):
    from ..heads.factory import needs_tokenizer
    from ..runtime.tokenizer import load_tokenizer

    head = policy_config.resolved().head
    if not needs_tokenizer(head):
        if tokenizer_path:
            log_warning(f"--tokenizer is ignored by the '{head}' head")
        return None
    if not tokenizer_path:
        raise PrerequisiteError(f"Head '{head}' needs a fitted tokenizer (--tokenizer)", "fit-tokenizer")
    if not Path(tokenizer_path).exists():
        raise PrerequisiteError(f"Tokenizer not found: {tokenizer_path}", "fit-tokenizer")
    return load_tokenizer(tokenizer_path, policy_config)


def _handle_train(parsed, cfg, out_dir, argv):
    from ..envsuite.tasks import suite_from_config
    from ..runtime.train import train

    demo_path = _demo_path(parsed, cfg)
    tokenizer = _tokenizer_for(cfg.policy, parsed.tokenizer)
    demos = _load_demos(demo_path)
    suite = suite_from_config(cfg.suite)
    write_run_files(out_dir, "train", cfg, suite, demo_path, argv)
    result = train(cfg.policy, demos, suite, out_dir, cfg.train, cfg.eval, tokenizer)
    log_success(f"✓ Final mean success {result.metrics.mean_success():.3f} "
                f"(best {result.best_success:.3f}), run directory: {out_dir}")
    return 0


def _optional_demos(parsed, policy_config):
    """Demos are only needed when goals are images."""
    if policy_config.goal_mode == "text":
        return None, None
    if not parsed.demos:
        raise PrerequisiteError(f"goal_mode '{policy_config.goal_mode}' needs --demos for goal images", "gen-demos")
    path = Path(parsed.demos)
    if not path.exists():
        raise PrerequisiteError(f"Demo file not found: {path}", "gen-demos")
    return path, _load_demos(path)


def _load_checkpoint_policy(parsed, cfg):
    from ..envsuite.tasks import suite_from_config
    from ..runtime.checkpoints import load_policy

    if not parsed.checkpoint or not Path(parsed.checkpoint).exists():
        raise PrerequisiteError(f"Checkpoint not found: {parsed.checkpoint}", "train")
    suite = suite_from_config(cfg.suite)
    policy, ckpt, suite = load_policy(parsed.checkpoint, suite=suite)
    log_info(f"Loaded policy from {parsed.checkpoint} (step {ckpt.step})")
    return policy, suite


def _handle_eval(parsed, cfg, out_dir, argv):
    from ..runtime.actors import PolicyActor
    from ..runtime.evaluate import evaluate

    policy, suite = _load_checkpoint_policy(parsed, cfg)
    demo_path, demos = _optional_demos(parsed, policy.config)
    ev = cfg.eval
    actor = PolicyActor(policy, demos=demos, deterministic=ev.deterministic, zero_goal=ev.zero_goal, seed=ev.seed)
    table = evaluate(actor, suite, ev.rollouts_per_task, ev.seed)
    path = table.write_csv(out_dir / METRICS_FILENAME)
    write_run_files(out_dir, "eval", cfg, suite, demo_path, argv, seed=ev.seed)
    for family, rate in sorted(table.family_success(suite.families()).items()):
        log_info(f"  {family}: {rate:.3f}")
    log_success(f"✓ Mean success {table.mean_success():.3f}, metrics saved: {path}")
    return 0


def deploy_rows(results):
    """CSV text of deployment episodes with the jerk of both interpolation modes on the same setpoints."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(DEPLOY_HEADER)
    for r in results:
        writer.writerow([
            r.task_id, r.seed, int(r.success), r.ticks, r.substeps,
            repr(r.command_jerk), repr(r.command_jerk_for("min_jerk")), repr(r.command_jerk_for("zoh")),
        ])
    return buffer.getvalue()


def _handle_deploy(parsed, cfg, out_dir, argv):
    from ..envsuite.tasks import suite_from_config
    from ..nkernel.rng import derive_seed
    from ..runtime.actors import ExpertActor, PolicyActor
    from ..runtime.deploy import deploy_sim

    dep = cfg.deploy
    demo_path = None
    if parsed.actor == "expert":
        suite = suite_from_config(cfg.suite)
        actor = ExpertActor(cfg.policy.effective_chunk_len)
    else:
        policy, suite = _load_checkpoint_policy(parsed, cfg)
        demo_path, demos = _optional_demos(parsed, policy.config)
        actor = PolicyActor(policy, demos=demos, seed=dep.seed)

    results = []
    total = len(suite) * dep.episodes_per_task
    for task in suite.tasks:
        for e in range(dep.episodes_per_task):
            seed = derive_seed(dep.seed, "deploy", task.task_id, e)
            results.append(deploy_sim(actor, suite, task.task_id, seed, dep.policy_hz, dep.ctrl_hz,
                                      dep.interpolation, dep.segment_horizon))
            log_progress(len(results), total, success=int(results[-1].success))

    path = atomic_write_bytes(out_dir / DEPLOY_FILENAME, deploy_rows(results).encode("utf-8"))
    write_run_files(out_dir, "deploy", cfg, suite, demo_path, argv, seed=dep.seed)
    success = sum(r.success for r in results) / len(results)
    smooth = sum(r.command_jerk_for("min_jerk") for r in results) / len(results)
    hold = sum(r.command_jerk_for("zoh") for r in results) / len(results)
    log_info(f"{results[0].substeps} control substeps per policy tick ({dep.policy_hz}Hz -> {dep.ctrl_hz}Hz)")
    log_info(f"Command jerk: min_jerk {smooth:.6f}, zoh {hold:.6f}")
    log_success(f"✓ Deployment success {success:.3f} over {len(results)} episodes, saved: {path}")
    return 0


def apply_axis(policy_config, axis, value, history_len):
    """PolicyConfig with one ablation axis set to one of its values."""
    if axis == "trunk":
        return replace(policy_config, trunk=value)
    if axis == "size":
        return replace(policy_config, size=value)
    if axis == "head":
        return replace(policy_config, head=value)
    if axis == "chunking":
        return replace(policy_config, use_chunking=value == "on")
    if axis == "history":
        if value == "none":
            return replace(policy_config, history=1, last_step_only=False)
        return replace(policy_config, history=history_len, last_step_only=value == "last")
    if axis == "goal":
        return replace(policy_config, goal_mode=value)
    if axis == "film":
        return replace(policy_config, use_film=value == "on")
    if axis == "encoder":
        return replace(policy_config, separate_encoders=value == "separate")
    if axis == "trunk_input":
        return replace(policy_config, trunk_input=value)
    raise ConfigError(f"Unknown ablation axis '{axis}' (known: {list(ABLATION_AXES)})")


def ablation_grid(cfg):
    """Every combination of ablate.axes, expanded once per seed in ablate.seeds.

    Returns:
        list of (variant, seed, RunConfig)
    """
    from ..filename.filename_utils import variant_dirname

    axes = cfg.ablate.axes
    names = list(axes)
    runs = []
    for values in itertools.product(*(axes[a] for a in names)):
        settings = dict(zip(names, values))
        policy = cfg.policy
        for axis, value in settings.items():
            policy = apply_axis(policy, axis, value, cfg.ablate.history_len)
        variant = variant_dirname(settings)
        for seed in cfg.ablate.seeds:
            run_cfg = replace(
                cfg,
                policy=replace(policy, seed=seed),
                eval=replace(cfg.eval, seed=seed, rollouts_per_task=cfg.ablate.rollouts_per_task),
                train=replace(cfg.train, eval_rollouts=cfg.ablate.rollouts_per_task),
            )
            runs.append((variant, seed, run_cfg))
    return runs


def run_variant(job):
    """Train and evaluate one (variant, seed); runs in the parent or in a worker process.

    Returns:
        tuple: (variant, seed, {family: success} or None, error message or None)
    """
    from ..dataio.demo_format import load_demoset
    from ..envsuite.tasks import suite_from_config
    from ..heads.factory import needs_tokenizer
    from ..runtime.tokenizer import fit_tokenizer, save_tokenizer
    from ..runtime.train import train
    from ..utils.config_utils import config_from_dict

    variant, seed, raw, demo_path, run_dir = job
    try:
        cfg = config_from_dict(raw)
        run_dir = Path(run_dir)
        suite = suite_from_config(cfg.suite)
        demos = load_demoset(demo_path)
        write_run_files(run_dir, "ablate", cfg, suite, demo_path, seed=seed)
        tokenizer = None
        if needs_tokenizer(cfg.policy.resolved().head):
            tokenizer = fit_tokenizer(cfg.policy, demos)
            save_tokenizer(run_dir / TOKENIZER_FILENAME, tokenizer, cfg.policy)
        result = train(cfg.policy, demos, suite, run_dir, cfg.train, cfg.eval, tokenizer)
        return variant, seed, result.metrics.family_success(suite.families(), result.metrics.final_step), None
    except Exception as e:  # torch, OpenCV and memory faults are recorded against this run only
        return variant, seed, None, f"{type(e).__name__}: {e}"


def comparison_table(outcomes, families=TASK_FAMILIES):
    """Rows = variant, columns = suite families plus the mean over families, averaged over seeds."""
    import pandas as pd

    rows = []
    for variant, seed, by_family, error in outcomes:
        if by_family is not None:
            rows.append({"variant": variant, "seed": seed, **by_family})
    columns = ["variant", *families, "mean"]
    if not rows:
        return pd.DataFrame(columns=columns)
    frame = pd.DataFrame(rows)
    present = [f for f in families if f in frame.columns]
    table = frame.groupby("variant", sort=False)[present].mean().reset_index()
    table["mean"] = table[present].mean(axis=1)
    return table.reindex(columns=columns)


def _handle_ablate(parsed, cfg, out_dir, argv):
    from ..envsuite.tasks import suite_from_config

    demo_path = _demo_path(parsed, cfg)
    if not cfg.ablate.axes:
        log_warning("ablate.axes is empty, running the base configuration only")
    runs = ablation_grid(cfg)
    jobs = [
        (variant, seed, run_cfg.to_dict(), str(demo_path), str(out_dir / variant / f"seed-{seed}"))
        for variant, seed, run_cfg in runs
    ]
    log_info(f"Ablation: {len(jobs)} run(s) over {len({v for v, _, _ in runs})} variant(s), "
             f"{cfg.ablate.workers} worker(s)")

    outcomes = []
    if cfg.ablate.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.ablate.workers) as pool:
            for outcome in pool.map(run_variant, jobs):
                outcomes.append(outcome)
                log_progress(len(outcomes), len(jobs))
    else:
        for job in jobs:
            outcomes.append(run_variant(job))
            log_progress(len(outcomes), len(jobs))

    table = comparison_table(outcomes)
    path = atomic_write_bytes(out_dir / COMPARISON_FILENAME, table.to_csv(index=False).encode("utf-8"))
    write_run_files(out_dir, "ablate", cfg, suite_from_config(cfg.suite), demo_path, argv)

    failed = [(v, s, err) for v, s, fam, err in outcomes if err is not None]
    for variant, seed, error in failed:
        log_warning(f"{variant} seed {seed} failed: {error}")
    if failed:
        log_warning(f"{len(failed)} of {len(jobs)} run(s) failed; comparison saved: {path}")
        return 1
    log_success(f"✓ Comparison of {table.shape[0]} variant(s) saved: {path}")
    return 0


def _handle_report(parsed, cfg, out_dir, argv):
    from ..report.report_utils import write_report

    write_report(parsed.metrics_dir, parsed.out_dir or parsed.metrics_dir)
    return 0


HANDLERS = {
    "gen-demos": _handle_gen_demos,
    "fit-tokenizer": _handle_fit_tokenizer,
    "train": _handle_train,
    "eval": _handle_eval,
    "deploy": _handle_deploy,
    "ablate": _handle_ablate,
    "report": _handle_report,
}


def run(argv):
    """Parse argv and execute one command; library errors propagate.

    Returns:
        int: exit status (0 iff all requested work completed)
    """
    parsed = build_parser().parse_args(argv)
    cfg, out_dir = resolve_common_options(parsed, parsed.command)
    if parsed.command != "report":
        out_dir.mkdir(parents=True, exist_ok=True)
        log_info(f"Run directory: {out_dir}")
    return HANDLERS[parsed.command](parsed, cfg, out_dir, argv)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return run(argv)
    except TaskchunkError as e:
        handle_error(e)
    except KeyboardInterrupt:
        handle_error("Interrupted")


if __name__ == "__main__":
    sys.exit(main())
