"""Colored logging utilities for terminal differentiation.
Supports info (default), success (green), warning (yellow), error (red) and
periodic progress lines for long loops (training, evaluation, ablations).
Set TASKCHUNK_QUIET=1 to silence info and progress output.
"""
import os
import sys


def color_text(text, color_code):
    """Wrap text with ANSI color code (works in most terminals)."""
    colors = {
        'red': 31,      # Errors
        'green': 32,    # Success
        'yellow': 33,   # Warnings
        'blue': 34,     # Progress
        'reset': 0
    }
    return f"\033[{colors.get(color_code, 0)}m{text}\033[0m"


def _quiet():
    return os.environ.get("TASKCHUNK_QUIET", "") not in ("", "0")


def log_info(msg):
    """Standard log (white/default)."""
    if not _quiet():
        print(msg)


def log_success(msg):
    """Success log (green)."""
    print(color_text(msg, 'green'))


def log_warning(msg):
    """Warning log (yellow)."""
    print(color_text(f"Warning: {msg}", 'yellow'))


def log_error(msg):
    """Error log (red) - also exits."""
    print(color_text(f"Error: {msg}", 'red'), file=sys.stderr)
    sys.exit(1)


def log_progress(step, total, **values):
    """Progress line (blue): 'Progress: 200/20000 (1%) loss=0.1234'.

    Args:
        step: Completed units of work
        total: Total units of work
        **values: Extra named values to append (floats get 4 decimals)
    """
    if _quiet():
        return
    percent = int(100 * step / total) if total else 100
    extras = " ".join(
        f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}" for k, v in values.items()
    )
    line = f"Progress: {step}/{total} ({percent}%)"
    print(color_text(f"{line} {extras}".rstrip(), 'blue'))
