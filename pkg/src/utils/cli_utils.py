import argparse
from pathlib import Path

from .config_utils import parse_config
from .log_utils import log_warning
# Relative import for grouped structure
from ..config.config import OUTPUT_DIR


def common_options_parser():
    """Parent parser with the flags every command accepts (--config, --set, --seed, --out-dir)."""
    parser = argparse.ArgumentParser(add_help=False)  # Parent style, no help
    parser.add_argument("--config", help="Run config JSON file (default: all defaults)")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Dotted override applied after the file, e.g. --set policy.chunk_len=5 (repeatable)",
    )
    parser.add_argument("--seed", type=int, help="Seed applied to data, policy, eval and deploy sections")
    parser.add_argument("--out-dir", help="Run directory (default: output/<timestamped name>)")
    return parser


def resolve_common_options(parsed, command):
    """Turn parsed common flags into (RunConfig, out_dir).

    Args:
        parsed: argparse namespace produced with common_options_parser as parent
        command: Command name, used for the default run directory name

    Returns:
        tuple: (RunConfig, Path)
    """
    overrides = list(parsed.overrides)
    if parsed.seed is not None:
        # --seed goes last so it wins over file and --set values
        overrides += [f"{section}.seed={parsed.seed}" for section in ("data", "policy", "eval", "deploy")]
    cfg, notes = parse_config(parsed.config, overrides)
    for note in notes:
        log_warning(note)

    if parsed.out_dir:
        out_dir = Path(parsed.out_dir)
    else:
        # Relative import for grouped structure (filename now in subdir)
        from ..filename.filename_utils import generate_run_name
        out_dir = OUTPUT_DIR / generate_run_name(command)
    return cfg, out_dir
