"""Counter-based random streams.

Every stochastic operation takes an explicit stream derived from (seed, *keys),
so two runs with the same seed draw the same numbers no matter the call order
of unrelated components.
"""

import contextlib
import zlib

import numpy as np
import torch


def _key(value):
    if isinstance(value, str):
        return zlib.crc32(value.encode("utf-8"))
    value = int(value)
    if value < 0:
        raise ValueError(f"Stream keys must be non-negative, got {value}")
    return value


def make_stream(seed, *keys):
    """numpy Generator over a Philox bit generator keyed by (seed, *keys)."""
    entropy = [_key(seed)] + [_key(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed, *keys):
    """63-bit integer seed derived from a stream (for APIs that take a plain int)."""
    return int(make_stream(seed, *keys).integers(0, 2**63 - 1))


def torch_generator(seed, *keys):
    """torch.Generator seeded from the same keyed stream."""
    generator = torch.Generator()
    generator.manual_seed(derive_seed(seed, *keys))
    return generator


@contextlib.contextmanager
def seeded_init(seed, *keys):
    """Fork the global torch RNG so module construction inside is deterministic."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(derive_seed(seed, "init", *keys))
        yield
