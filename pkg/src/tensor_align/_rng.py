"""Counter-based random substreams.

Every stochastic routine in the package draws from a Philox stream keyed by
(seed, *path) where the path names the consumer and the iteration index.
Streams are therefore independent of execution order and thread count: the
i-th permutation or bootstrap replicate sees the same draws no matter how the
loop is scheduled.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["substream"]


def _as_entropy(part) -> int:
    """Map a path element to a stable non-negative integer."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"substream path ints must be >= 0, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"substream path elements must be int or str, got {type(part)!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Return a Generator for the (seed, *path) substream.

    Parameters
    ----------
    seed : int
        Top-level seed (non-negative).
    *path : int or str
        Consumer name and indices, e.g. ``substream(42, "perm", 17)``.
    """
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"seed must be a non-negative int, got {seed!r}")
    entropy = (int(seed),) + tuple(_as_entropy(p) for p in path)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
