"""Bit-exact demo file format.

    8 bytes  magic "BAKUDEM1"
    u32      version
    u32      N (records)
    u32      metadata length, then UTF-8 JSON metadata
             (suite_hash, image_size, view_names, action_dim)
    per record:
      u32 task_id, u32 L,
      f32 LE arrays: each view (L, G, G, 3) in view_names order, proprio (L, 4), actions (L, A)
    u32      CRC32 of every preceding byte

All integers little-endian.
"""

import hashlib
import json
import struct
import zlib

import numpy as np

from .demos import DemoSet, TrajectoryRecord
from ..cleanup.cleanup_utils import atomic_write_bytes
from ..config.config import PROPRIO_DIM
from ..utils.errors import FormatError

MAGIC = b"BAKUDEM1"
VERSION = 1
_U32 = struct.Struct("<I")


def encode_demoset(demos):
    """Serialize a DemoSet to bytes."""
    metadata = dict(demos.metadata)
    view_names = list(metadata.get("view_names", []))
    meta_bytes = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, _U32.pack(VERSION), _U32.pack(len(demos.records)), _U32.pack(len(meta_bytes)), meta_bytes]
    for record in demos.records:
        if list(record.views) != view_names:
            raise FormatError(f"Record views {list(record.views)} do not match metadata {view_names}")
        parts.append(_U32.pack(record.task_id))
        parts.append(_U32.pack(record.length))
        for view in view_names:
            parts.append(np.ascontiguousarray(record.views[view], dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(record.proprio, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(record.actions, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + _U32.pack(zlib.crc32(body) & 0xFFFFFFFF)


def save_demoset(demos, path):
    """Write a DemoSet atomically; returns the path."""
    return atomic_write_bytes(path, encode_demoset(demos))


class _Reader:
    def __init__(self, blob, source):
        self.blob = blob
        self.offset = 0
        self.source = source

    def take(self, n, what):
        if self.offset + n > len(self.blob):
            raise FormatError(f"{self.source}: truncated while reading {what}")
        out = self.blob[self.offset:self.offset + n]
        self.offset += n
        return out

    def u32(self, what):
        return _U32.unpack(self.take(4, what))[0]

    def f32(self, shape, what):
        count = int(np.prod(shape))
        raw = self.take(4 * count, what)
        return np.frombuffer(raw, dtype="<f4").astype(np.float32).reshape(shape)


def decode_demoset(blob, source="demo file"):
    """Parse demo file bytes; any corruption raises FormatError and nothing is returned."""
    if len(blob) < len(MAGIC) + 16:
        raise FormatError(f"{source}: file too short ({len(blob)} bytes)")
    if blob[:len(MAGIC)] != MAGIC:
        raise FormatError(f"{source}: bad magic {blob[:len(MAGIC)]!r}")
    body, trailer = blob[:-4], blob[-4:]
    if zlib.crc32(body) & 0xFFFFFFFF != _U32.unpack(trailer)[0]:
        raise FormatError(f"{source}: checksum mismatch (file truncated or corrupted)")

    reader = _Reader(body, source)
    reader.take(len(MAGIC), "magic")
    version = reader.u32("version")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported version {version} (expected {VERSION})")
    count = reader.u32("record count")
    meta_len = reader.u32("metadata length")
    try:
        metadata = json.loads(reader.take(meta_len, "metadata").decode("utf-8"))
        view_names = list(metadata["view_names"])
        size = int(metadata["image_size"])
        action_dim = int(metadata["action_dim"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{source}: malformed metadata ({e})")

    records = []
    for i in range(count):
        task_id = reader.u32(f"record {i} task_id")
        L = reader.u32(f"record {i} length")
        views = {v: reader.f32((L, size, size, 3), f"record {i} view '{v}'") for v in view_names}
        proprio = reader.f32((L, PROPRIO_DIM), f"record {i} proprio")
        actions = reader.f32((L, action_dim), f"record {i} actions")
        records.append(TrajectoryRecord(task_id=task_id, views=views, proprio=proprio, actions=actions))
    if reader.offset != len(body):
        raise FormatError(f"{source}: {len(body) - reader.offset} unexpected bytes after the last record")
    return DemoSet(tuple(records), metadata)


def load_demoset(path):
    """Read a demo file written by save_demoset."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except FileNotFoundError:
        raise FormatError(f"Demo file not found: {path}")
    return decode_demoset(blob, source=str(path))


def git_blob_hash(path):
    """Content hash as git computes it for a blob (sha1 of 'blob <size>\\0' + bytes)."""
    with open(path, "rb") as f:
        data = f.read()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()
