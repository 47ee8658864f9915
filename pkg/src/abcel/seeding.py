"""Deterministic named substreams derived from a single root seed.

Every source of randomness in an experiment is a substream addressed by
(root seed, tag, tag, ...), so reruns with the same seed are bit-identical
and workers never share generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _tag_to_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & 0xFFFFFFFF
    digest = hashlib.sha256(str(tag).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def substream(seed: int, *tags) -> np.random.Generator:
    """A generator keyed by the root seed and a path of tags (ints or strings)."""
    entropy = [int(seed)] + [_tag_to_int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
