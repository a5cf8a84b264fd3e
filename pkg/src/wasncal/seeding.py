"""Deterministic RNG substreams.

All randomness in the package flows from a single root seed. Named
substreams keep independent concerns (scene sampling, weight init, dropout,
sensor noise, ...) decoupled: adding draws to one stream never perturbs
another, so experiment results stay reproducible under pipeline changes.
"""

import hashlib

import numpy as np


def _stream_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Generator for substream `name` (optionally indexed, e.g. per scene)."""
    seq = np.random.SeedSequence([int(root_seed), _stream_key(name), int(index)])
    return np.random.default_rng(seq)


def child_seed(root_seed: int, name: str, index: int = 0) -> int:
    """Stable 63-bit integer seed derived from (root, name, index)."""
    seq = np.random.SeedSequence([int(root_seed), _stream_key(name), int(index)])
    return int(seq.generate_state(1, np.uint64)[0] >> 1)
