"""Policy checkpoints: parameters, buffers and Adam state in the tensor container"""

from dataclasses import asdict
from pathlib import Path

from ..envsuite.tasks import TaskSuite, suite_hash
from ..nkernel.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from ..policy.policy import ChunkPolicy
from ..utils.config_utils import config_from_dict
from ..utils.errors import ConfigError, FormatError, LoadError


def policy_meta(policy, suite):
    return {
        "policy_config": asdict(policy.config),
        "suite": suite.to_dict(),
        "suite_hash": suite_hash(suite),
    }


def save_policy(path, policy, suite, store=None):
    """Write final.ckpt / best.ckpt style checkpoints

    Args:
        path: Output path
        policy: ChunkPolicy
        suite: TaskSuite the policy was trained on
        store: ParamStore with Adam state (optional)

    Returns:
        Path: The written path
    """
    sections = {"policy": policy.state_dict()}
    if store is not None:
        sections["optimizer"] = store.state_tensors()
    step = store.step if store is not None else 0
    return save_checkpoint(path, sections, step=step, meta=policy_meta(policy, suite))


def load_policy(source, suite=None, policy_config=None):
    """Rebuild a ChunkPolicy from a checkpoint

    Args:
        source: Checkpoint path or loaded Checkpoint
        suite: Expected TaskSuite (mismatch raises LoadError); None uses the stored one
        policy_config: Expected PolicyConfig (mismatch raises LoadError)

    Returns:
        tuple: (ChunkPolicy, Checkpoint, TaskSuite)
    """
    ckpt = source if isinstance(source, Checkpoint) else load_checkpoint(Path(source))
    meta = ckpt.meta
    if "policy_config" not in meta or "suite" not in meta:
        raise LoadError("Checkpoint carries no policy config or suite metadata")
    try:
        config = config_from_dict({"policy": meta["policy_config"]}).policy
        stored_suite = TaskSuite.from_dict(meta["suite"])
    except ConfigError as e:
        raise LoadError(f"Checkpoint metadata is invalid: {e}")

    if suite is not None and suite_hash(suite) != meta.get("suite_hash"):
        raise LoadError("Checkpoint was trained on a different task suite")
    if policy_config is not None and asdict(policy_config.resolved()) != asdict(config):
        differing = sorted(k for k, v in asdict(policy_config.resolved()).items() if asdict(config).get(k) != v)
        raise LoadError(f"Checkpoint policy config differs from the requested one in: {', '.join(differing)}")

    suite = suite or stored_suite
    policy = ChunkPolicy(config, suite.views, suite.image_size, len(suite))
    try:
        state = ckpt.section("policy")
        policy.load_state_dict(state, strict=True)
    except (FormatError, RuntimeError) as e:
        raise LoadError(f"Checkpoint tensors do not match the policy architecture: {e}")
    policy.eval()
    return policy, ckpt, suite
