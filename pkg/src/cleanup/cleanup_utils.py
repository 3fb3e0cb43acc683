"""Run artifact writing: partial files are always cleaned up, never left behind"""

import json
import os
import tempfile
from pathlib import Path


def ensure_output_dir(output_path):
    """Ensure the parent directory of an output file exists

    Args:
        output_path: Path to output file

    Returns:
        Path: The output path
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    return output_path


def atomic_write_bytes(output_path, data):
    """Write bytes via a sibling temp file + rename so readers never see a partial file

    Args:
        output_path: Destination path
        data: Bytes to write

    Returns:
        Path: The output path
    """
    output_path = ensure_output_dir(output_path)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{output_path.name}.", dir=output_path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp_name, output_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return output_path


def write_json(output_path, payload):
    """Write a JSON document (sorted keys, indented) atomically."""
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    return atomic_write_bytes(output_path, text.encode("utf-8"))
