"""Checkpoint container: magic, JSON header, raw little-endian float32 payload.

Layout:
    8 bytes   magic "TCHKPT01"
    u32       header length in bytes
    header    UTF-8 JSON {"step", "tensors": [{"name", "section", "shape", "dtype"}], "meta"}
    payload   float32 LE values of every tensor, in header order
"""

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np
import torch

from ..cleanup.cleanup_utils import atomic_write_bytes
from ..utils.errors import FormatError

MAGIC = b"TCHKPT01"
_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    """Loaded checkpoint: tensors grouped by named section, step count and metadata."""

    sections: Dict[str, Dict[str, torch.Tensor]]
    step: int = 0
    meta: Dict[str, Any] = field(default_factory=dict)

    def section(self, name):
        if name not in self.sections:
            raise FormatError(f"Checkpoint has no section '{name}' (sections: {sorted(self.sections)})")
        return self.sections[name]


def encode_checkpoint(sections, step=0, meta=None):
    """Serialize named sections of tensors to container bytes."""
    entries, chunks = [], []
    for section in sorted(sections):
        for name in sorted(sections[section]):
            tensor = sections[section][name]
            array = tensor.detach().cpu().contiguous().numpy().astype("<f4", copy=False)
            entries.append({"name": name, "section": section, "shape": list(array.shape), "dtype": "float32"})
            chunks.append(array.tobytes())
    header = json.dumps(
        {"step": int(step), "tensors": entries, "meta": meta or {}}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    return MAGIC + _U32.pack(len(header)) + header + b"".join(chunks)


def save_checkpoint(path, sections, step=0, meta=None):
    """Write a checkpoint atomically

    Args:
        path: Output file path
        sections: Mapping section name -> {tensor name -> tensor}
        step: Optimizer step count stored in the header
        meta: JSON-serializable metadata (configs, suite, counters)

    Returns:
        Path: The written path
    """
    return atomic_write_bytes(path, encode_checkpoint(sections, step, meta))


def decode_checkpoint(blob, source="checkpoint"):
    """Parse container bytes; any structural problem raises FormatError."""
    if len(blob) < len(MAGIC) + _U32.size or blob[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    (header_len,) = _U32.unpack_from(blob, offset)
    offset += _U32.size
    if offset + header_len > len(blob):
        raise FormatError(f"{source}: truncated header")
    try:
        header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
        entries = header["tensors"]
        step = int(header["step"])
        meta = header.get("meta", {})
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{source}: malformed header ({e})")
    offset += header_len

    sections = {}
    for entry in entries:
        if entry.get("dtype") != "float32":
            raise FormatError(f"{source}: unsupported dtype {entry.get('dtype')!r} for '{entry.get('name')}'")
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = 4 * math.prod(shape)
        if offset + nbytes > len(blob):
            raise FormatError(f"{source}: truncated payload at tensor '{entry['name']}'")
        if nbytes == 0:
            array = np.zeros(shape, dtype="<f4")
        else:
            array = np.frombuffer(blob, dtype="<f4", count=math.prod(shape), offset=offset).reshape(shape)
        sections.setdefault(entry["section"], {})[entry["name"]] = torch.from_numpy(array.astype(np.float32))
        offset += nbytes
    if offset != len(blob):
        raise FormatError(f"{source}: {len(blob) - offset} unexpected trailing bytes")
    return Checkpoint(sections=sections, step=step, meta=meta)


def load_checkpoint(path):
    """Read and parse a checkpoint file."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        raise FormatError(f"Checkpoint not found: {path}")
    return decode_checkpoint(blob, source=str(path))
