"""Seeded Adam training loop with periodic evaluation snapshots"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .actors import PolicyActor
from .checkpoints import save_policy
from .evaluate import evaluate
from .metrics import MetricsTable
from ..config.config import BEST_CHECKPOINT, FINAL_CHECKPOINT, METRICS_FILENAME
from ..config.run_config import EvalConfig, TrainConfig
from ..dataio.sampling import SamplingConfig, sample_batch
from ..nkernel.params import ParamStore, adam_step
from ..nkernel.rng import make_stream, torch_generator
from ..policy.policy import ChunkPolicy
from ..utils.errors import ContractViolation, TrainingAborted
from ..utils.log_utils import log_info, log_progress, log_success


@dataclass
class TrainResult:
    policy: ChunkPolicy
    store: ParamStore
    metrics: MetricsTable
    final_path: Optional[Path] = None
    best_path: Optional[Path] = None
    best_success: float = -1.0


def _check_demos(demos, suite):
    if tuple(demos.view_names) and tuple(demos.view_names) != tuple(suite.views):
        raise ContractViolation(f"Demos hold views {list(demos.view_names)}, suite renders {list(suite.views)}")
    image_size = demos.metadata.get("image_size")
    if image_size is not None and int(image_size) != suite.image_size:
        raise ContractViolation(f"Demos were rendered at {image_size}px, suite uses {suite.image_size}px")


def train(policy_config, demos, suite, out_dir=None, train_config=None, eval_config=None, tokenizer=None):
    """Train a ChunkPolicy on demonstrations

    Batch t is drawn from the stream (seed, 'batch', t) and stochastic heads use
    the generator (seed, 'head', t), so (config, seed, demos) fix the result.

    Args:
        policy_config: PolicyConfig
        demos: DemoSet rendered for the suite
        suite: TaskSuite
        out_dir: Run directory for final.ckpt, best.ckpt and metrics.csv (None writes nothing)
        train_config: TrainConfig (evaluation cadence, logging)
        eval_config: EvalConfig (evaluation seed and decoding)
        tokenizer: Fitted tokenizer for the bet / vqbet heads

    Returns:
        TrainResult
    """
    train_config = train_config or TrainConfig()
    eval_config = eval_config or EvalConfig()
    config = policy_config.resolved()
    _check_demos(demos, suite)

    policy = ChunkPolicy(config, suite.views, suite.image_size, len(suite), tokenizer)
    store = ParamStore.from_module(policy)
    names = store.names()
    params = [store.params[n] for n in names]
    sampling = SamplingConfig.from_policy(config)
    counts = policy.count_parameters()
    log_info(f"Policy parameters: encoders {counts['encoders']}, trunk {counts['trunk']}, "
             f"head {counts['head']}, total {counts['total']}")

    result = TrainResult(policy, store, MetricsTable())
    out_dir = Path(out_dir) if out_dir is not None else None
    running, seen = 0.0, 0
    last_loss = math.nan

    def snapshot(step):
        policy.eval()
        actor = PolicyActor(policy, demos=demos, deterministic=eval_config.deterministic, seed=eval_config.seed)
        table = evaluate(actor, suite, train_config.eval_rollouts, eval_config.seed, step=step, loss=last_loss,
                         verbose=False)
        policy.train()
        result.metrics.extend(table)
        mean = table.mean_success()
        log_info(f"Step {step}: mean success {mean:.3f}")
        if mean > result.best_success:
            result.best_success = mean
            if out_dir is not None:
                result.best_path = save_policy(out_dir / BEST_CHECKPOINT, policy, suite, store)

    policy.train()
    for step in range(1, config.steps + 1):
        batch = sample_batch(demos, sampling, make_stream(config.seed, "batch", step), policy.chunk_dim)
        loss = policy.loss(batch, generator=torch_generator(config.seed, "head", step))
        if not torch.isfinite(loss):
            raise TrainingAborted(step, (config.seed, "batch", step), float(loss))
        grads = torch.autograd.grad(loss, params, allow_unused=True)
        adam_step(store, dict(zip(names, grads)), config.lr, inplace=True)

        running += float(loss)
        seen += 1
        if step % train_config.log_every == 0 or step == config.steps:
            last_loss = running / seen
            log_progress(step, config.steps, loss=last_loss)
            running, seen = 0.0, 0
        if train_config.eval_every and step % train_config.eval_every == 0 and step != config.steps:
            snapshot(step)

    snapshot(config.steps)
    if out_dir is not None:
        result.final_path = save_policy(out_dir / FINAL_CHECKPOINT, policy, suite, store)
        result.metrics.write_csv(out_dir / METRICS_FILENAME)
        log_success(f"Training finished: {result.final_path}")
    policy.eval()
    return result
