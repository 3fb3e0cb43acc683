"""Strict loading of run configurations: JSON file, env overrides, --set overrides, validation"""

import difflib
import json
import os
import typing
from dataclasses import fields
from pathlib import Path

from dotenv import load_dotenv

from .errors import ConfigError
# Relative import for grouped structure
from ..config.config import (
    ABLATION_AXES,
    ENV_PREFIX,
    GOAL_MODES,
    HEAD_KINDS,
    INTERPOLATION_MODES,
    KNOWN_VIEWS,
    MIN_IMAGE_SIZE,
    MODEL_SIZE_PRESETS,
    TRUNK_INPUTS,
    TRUNK_KINDS,
)
from ..config.run_config import SECTION_TYPES, RunConfig


def valid_keys():
    """All dotted 'section.field' keys accepted by RunConfig."""
    return [f"{name}.{f.name}" for name, cls in SECTION_TYPES.items() for f in fields(cls)]


def _suggest(key):
    match = difflib.get_close_matches(key, valid_keys() + list(SECTION_TYPES), n=1, cutoff=0.5)
    return f" (did you mean '{match[0]}'?)" if match else ""


def _coerce(value, hint):
    """Check/convert a JSON value against a dataclass field type; raises TypeError."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union:
        if value is None:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(value, inner)
    if hint is bool:
        if isinstance(value, bool):
            return value
        raise TypeError("expected true or false")
    if hint is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise TypeError("expected an integer")
    if hint is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise TypeError("expected a number")
    if hint is str:
        if isinstance(value, str):
            return value
        raise TypeError("expected a string")
    if origin in (tuple, list):
        if not isinstance(value, (list, tuple)):
            raise TypeError("expected a list")
        items = [_coerce(v, args[0]) for v in value]
        return tuple(items) if origin is tuple else items
    if origin is dict:
        if not isinstance(value, dict) or not all(isinstance(k, str) for k in value):
            raise TypeError("expected an object with string keys")
        return {k: _coerce(v, args[1]) for k, v in value.items()}
    raise TypeError(f"unsupported field type {hint}")


def parse_value(text):
    """Interpret an override value as JSON when possible, else as a plain string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_override(item):
    """Split 'policy.chunk_len=5' into ('policy.chunk_len', 5)."""
    if "=" not in item:
        raise ConfigError(f"Override '{item}' must look like section.key=value")
    key, text = item.split("=", 1)
    return key.strip(), parse_value(text.strip())


def env_overrides(environ):
    """Collect TASKCHUNK__SECTION__FIELD=value variables as dotted overrides."""
    found = []
    for name, text in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        path = name[len(ENV_PREFIX):].lower().split("__")
        found.append((".".join(path), parse_value(text)))
    return found


def _set_path(raw, key, value, problems):
    parts = key.split(".")
    if len(parts) != 2 or not all(parts):
        problems.append(f"Override key '{key}' must be section.field{_suggest(key)}")
        return
    section, name = parts
    node = raw.setdefault(section, {})
    if not isinstance(node, dict):
        problems.append(f"Section '{section}' must be an object")
        return
    node[name] = value


def _build(raw, problems):
    if not isinstance(raw, dict):
        problems.append("Config JSON must be an object with sections")
        return RunConfig()
    sections = {}
    for section, values in raw.items():
        if section not in SECTION_TYPES:
            problems.append(f"Unknown section '{section}'{_suggest(section)}")
            continue
        if not isinstance(values, dict):
            problems.append(f"Section '{section}' must be an object")
            continue
        cls = SECTION_TYPES[section]
        hints = typing.get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for name, value in values.items():
            key = f"{section}.{name}"
            if name not in known:
                problems.append(f"Unknown key '{key}'{_suggest(key)}")
                continue
            try:
                kwargs[name] = _coerce(value, hints[name])
            except TypeError as e:
                problems.append(f"{key}: {e} (got {value!r})")
        sections[section] = cls(**kwargs)
    return RunConfig(**sections)


def _one_of(problems, key, value, allowed):
    if value not in allowed:
        problems.append(f"{key} must be one of {list(allowed)} (got {value!r})")


def _at_least(problems, key, value, low):
    if value < low:
        problems.append(f"{key} must be >= {low} (got {value})")


def validate_run_config(cfg):
    """Check value constraints of a built RunConfig.

    Returns:
        tuple: (problems, notes) lists of strings; notes are non-fatal
    """
    problems, notes = [], []
    s, d, p = cfg.suite, cfg.data, cfg.policy

    _at_least(problems, "suite.image_size", s.image_size, MIN_IMAGE_SIZE)
    if not s.views:
        problems.append("suite.views must name at least one view")
    for view in s.views:
        _one_of(problems, "suite.views[]", view, KNOWN_VIEWS)
    if len(set(s.views)) != len(s.views):
        problems.append("suite.views must not repeat a view")
    if s.path and not Path(s.path).exists():
        problems.append(f"suite.path not found: {s.path}")

    _at_least(problems, "data.per_task", d.per_task, 1)
    _at_least(problems, "data.noise_std", d.noise_std, 0.0)
    _at_least(problems, "data.max_retries", d.max_retries, 0)

    _one_of(problems, "policy.trunk", p.trunk, TRUNK_KINDS)
    _one_of(problems, "policy.head", p.head, HEAD_KINDS)
    _one_of(problems, "policy.goal_mode", p.goal_mode, GOAL_MODES)
    _one_of(problems, "policy.trunk_input", p.trunk_input, TRUNK_INPUTS)
    if p.size is not None:
        _one_of(problems, "policy.size", p.size, tuple(MODEL_SIZE_PRESETS))
    for key in ("history", "chunk_len", "k_goal", "hidden_dim", "cond_dim", "layers", "attn_heads",
                "head_hidden", "mlp_trunk_hidden", "gmm_modes", "bet_clusters", "rvq_layers",
                "rvq_latent_dim", "rvq_batch_size", "diffusion_steps", "batch_size"):
        _at_least(problems, f"policy.{key}", getattr(p, key), 1)
    _at_least(problems, "policy.num_bins", p.num_bins, 2)
    _at_least(problems, "policy.rvq_codes", p.rvq_codes, 2)
    _at_least(problems, "policy.rvq_steps", p.rvq_steps, 0)
    _at_least(problems, "policy.steps", p.steps, 0)
    for key in ("ensemble_m", "focal_gamma", "offset_weight", "rvq_commitment"):
        _at_least(problems, f"policy.{key}", getattr(p, key), 0.0)
    if p.attn_heads >= 1 and p.hidden_dim % p.attn_heads != 0:
        problems.append(f"policy.hidden_dim ({p.hidden_dim}) must be divisible by policy.attn_heads ({p.attn_heads})")
    if len(p.vision_channels) != 4 or any(c < 1 for c in p.vision_channels):
        problems.append(f"policy.vision_channels must list 4 positive channel counts (got {list(p.vision_channels)})")
    if not 0.0 <= p.rvq_ema_decay < 1.0:
        problems.append(f"policy.rvq_ema_decay must be in [0, 1) (got {p.rvq_ema_decay})")
    if not 0.0 < p.beta_start <= p.beta_end < 1.0:
        problems.append("policy.beta_start/beta_end must satisfy 0 < beta_start <= beta_end < 1")
    if p.lr <= 0:
        problems.append(f"policy.lr must be > 0 (got {p.lr})")

    if p.use_chunking and p.chunk_len == 1:
        notes.append("policy.use_chunking=true with policy.chunk_len=1 is a no-op")
    if not p.use_chunking and p.chunk_len != 1:
        notes.append(f"policy.chunk_len={p.chunk_len} is ignored while policy.use_chunking=false (H=1)")
    if p.trunk == "mlp" and p.trunk_input != "separate":
        notes.append("policy.trunk_input only affects the transformer trunk")
    if p.last_step_only and p.history == 1:
        notes.append("policy.last_step_only has no effect with policy.history=1")

    _at_least(problems, "train.eval_every", cfg.train.eval_every, 0)
    _at_least(problems, "train.eval_rollouts", cfg.train.eval_rollouts, 1)
    _at_least(problems, "train.log_every", cfg.train.log_every, 1)
    _at_least(problems, "eval.rollouts_per_task", cfg.eval.rollouts_per_task, 1)

    dep = cfg.deploy
    if dep.policy_hz < 1 or dep.ctrl_hz < 1:
        problems.append("deploy.policy_hz and deploy.ctrl_hz must be positive")
    elif dep.ctrl_hz % dep.policy_hz != 0:
        problems.append(f"deploy.ctrl_hz ({dep.ctrl_hz}) must be an integer multiple of deploy.policy_hz ({dep.policy_hz})")
    _one_of(problems, "deploy.interpolation", dep.interpolation, INTERPOLATION_MODES)
    _at_least(problems, "deploy.segment_horizon", dep.segment_horizon, 0.0)
    _at_least(problems, "deploy.episodes_per_task", dep.episodes_per_task, 1)

    ab = cfg.ablate
    for axis, values in ab.axes.items():
        if axis not in ABLATION_AXES:
            problems.append(f"Unknown ablation axis 'ablate.axes.{axis}'{_suggest('ablate.axes.' + axis)}")
            continue
        if not values:
            problems.append(f"ablate.axes.{axis} must list at least one value")
        for value in values:
            _one_of(problems, f"ablate.axes.{axis}[]", value, ABLATION_AXES[axis])
    if not ab.seeds:
        problems.append("ablate.seeds must list at least one seed")
    _at_least(problems, "ablate.workers", ab.workers, 1)
    _at_least(problems, "ablate.history_len", ab.history_len, 2)
    _at_least(problems, "ablate.rollouts_per_task", ab.rollouts_per_task, 1)
    return problems, notes


def parse_config(path=None, overrides=(), environ=None):
    """Load a RunConfig strictly.

    Order: JSON file (or empty), TASKCHUNK__* environment variables, then
    '--set section.key=value' overrides. All problems are aggregated into a
    single ConfigError.

    Args:
        path: JSON config file or None for all defaults
        overrides: Iterable of 'section.key=value' strings
        environ: Mapping used for env overrides (None = os.environ plus .env)

    Returns:
        tuple: (RunConfig, notes)
    """
    raw = {}
    problems = []
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"Config file not found: {config_path}")
        try:
            with open(config_path, "r") as f:
                raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in config file {config_path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigError("Config JSON must be an object with sections")

    if environ is None:
        load_dotenv()
        environ = os.environ
    for key, value in env_overrides(environ):
        _set_path(raw, key, value, problems)
    for item in overrides:
        try:
            key, value = parse_override(item)
        except ConfigError as e:
            problems.extend(e.problems)
            continue
        _set_path(raw, key, value, problems)

    cfg = _build(raw, problems)
    more, notes = validate_run_config(cfg)
    problems.extend(more)
    if problems:
        raise ConfigError(problems)
    return cfg, notes


def config_from_dict(raw):
    """Build and validate a RunConfig from an already-parsed dict (resolved config files, workers)."""
    problems = []
    cfg = _build(raw, problems)
    more, _ = validate_run_config(cfg)
    problems.extend(more)
    if problems:
        raise ConfigError(problems)
    return cfg
